#include "cep/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "cep/matcher.hpp"
#include "cep/veql.hpp"
#include "cep/window.hpp"
#include "json.hpp"

namespace cep::bench {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw SpecError("bench spec: " + what); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    bad(std::string("field '") + key + "' has the wrong type");
  }
}

ActorScript parse_actor(const json& j) {
  if (!j.is_object()) bad("script entries must be objects");
  ActorScript a;
  auto at = j.find("at");
  if (at == j.end() || !at->is_array() || at->size() != 2 || !(*at)[0].is_number() ||
      !(*at)[1].is_number())
    bad("script entry needs \"at\": [start_s, end_s]");
  a.start_s = (*at)[0].get<double>();
  a.end_s = (*at)[1].get<double>();
  if (!(a.end_s > a.start_s) || a.start_s < 0) bad("script time range must be increasing");
  a.label = get_or<std::string>(j, "label", "");
  if (a.label.empty()) bad("script entry needs a label");
  a.color = get_or<std::string>(j, "color", "");
  a.count = get_or<int>(j, "count", 1);
  if (a.count < 1) bad("script count must be positive");
  a.x = get_or<double>(j, "x", a.x);
  a.y = get_or<double>(j, "y", a.y);
  a.vx = get_or<double>(j, "vx", a.vx);
  a.vy = get_or<double>(j, "vy", a.vy);
  a.width = get_or<double>(j, "width", a.width);
  a.height = get_or<double>(j, "height", a.height);
  a.spacing = get_or<double>(j, "spacing", a.spacing);
  if (!(a.width > 0 && a.height > 0)) bad("script boxes need positive size");
  if (auto c = j.find("confidence"); c != j.end() && !c->is_null()) {
    if (!c->is_number()) bad("script confidence must be a number");
    a.confidence = c->get<double>();
    if (*a.confidence < 0 || *a.confidence > 1) bad("script confidence must lie in [0, 1]");
  }
  return a;
}

}  // namespace

SyntheticStreamSpec parse_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(e.what());
  }
  if (!j.is_object()) bad("top level must be an object");

  SyntheticStreamSpec s;
  s.producers = get_or<int>(j, "producers", s.producers);
  s.fps = get_or<double>(j, "fps", s.fps);
  s.duration_s = get_or<double>(j, "duration_s", s.duration_s);
  s.width = get_or<double>(j, "width", s.width);
  s.height = get_or<double>(j, "height", s.height);
  if (s.producers < 1) bad("producers must be at least 1");
  if (!(s.fps > 0) || !(s.duration_s > 0)) bad("fps and duration_s must be positive");
  if (!(s.width > 0 && s.height > 0)) bad("frame size must be positive");

  if (auto b = j.find("background"); b != j.end()) {
    if (!b->is_object()) bad("background must be an object");
    auto& bg = s.background;
    if (auto r = b->find("objects_per_frame"); r != b->end()) {
      if (!r->is_array() || r->size() != 2) bad("objects_per_frame must be [min, max]");
      bg.min_objects = (*r)[0].get<int>();
      bg.max_objects = (*r)[1].get<int>();
    }
    if (bg.min_objects < 0 || bg.max_objects < bg.min_objects) bad("bad objects_per_frame range");
    if (auto l = b->find("labels"); l != b->end()) {
      if (!l->is_object() || l->empty()) bad("background labels must be a non-empty object");
      bg.labels.clear();
      for (const auto& [k, v] : l->items()) {
        if (!v.is_number() || v.get<double>() <= 0) bad("label weights must be positive");
        bg.labels[k] = v.get<double>();
      }
    }
    if (auto sp = b->find("speed"); sp != b->end()) {
      if (!sp->is_array() || sp->size() != 2) bad("speed must be [min, max]");
      bg.min_speed = (*sp)[0].get<double>();
      bg.max_speed = (*sp)[1].get<double>();
    }
    if (bg.min_speed < 0 || bg.max_speed < bg.min_speed) bad("bad speed range");
  }

  if (auto sc = j.find("script"); sc != j.end()) {
    if (!sc->is_array()) bad("script must be an array");
    for (const auto& e : *sc) s.script.push_back(parse_actor(e));
  }
  if (auto r = j.find("repeat_s"); r != j.end() && !r->is_null()) {
    s.repeat_s = r->get<double>();
    if (!(*s.repeat_s > 0)) bad("repeat_s must be positive");
  }

  if (auto n = j.find("noise"); n != j.end()) {
    s.noise.dropout = get_or<double>(*n, "dropout", 0.0);
    s.noise.confidence_jitter = get_or<double>(*n, "confidence_jitter", 0.0);
    s.noise.bbox_jitter = get_or<double>(*n, "bbox_jitter", 0.0);
    if (s.noise.dropout < 0 || s.noise.dropout > 1) bad("dropout must lie in [0, 1]");
    if (s.noise.confidence_jitter < 0 || s.noise.bbox_jitter < 0) bad("jitter must be >= 0");
  }

  if (auto q = j.find("queries"); q != j.end()) {
    if (q->is_object()) {
      for (const auto& [k, v] : q->items()) {
        if (!v.is_string()) bad("query texts must be strings");
        s.queries.emplace_back(k, v.get<std::string>());
      }
    } else if (q->is_array()) {
      for (const auto& e : *q) {
        auto id = get_or<std::string>(e, "id", "");
        auto text = get_or<std::string>(e, "query", "");
        if (id.empty() || text.empty()) bad("query entries need id and query");
        s.queries.emplace_back(id, text);
      }
    } else {
      bad("queries must be an object or an array");
    }
  }

  if (auto sw = j.find("producer_sweep"); sw != j.end()) {
    s.producer_sweep = sw->get<std::vector<int>>();
    for (int n : s.producer_sweep)
      if (n < 1) bad("producer_sweep entries must be positive");
  }
  return s;
}

SyntheticStreamSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::string producer_name(int index, int producers) {
  return producers == 1 ? "Camera" : "Camera" + std::to_string(index + 1);
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct Actor {
  std::int64_t id = 0;
  std::string label;
  std::string color;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;  // exclusive
  double x = 0, y = 0, vx = 0, vy = 0, w = 0, h = 0;
  std::optional<double> confidence;
  std::mt19937_64 rng;
  std::int64_t first_frame = -1;
};

double default_size(const std::string& label, bool height) {
  static const std::map<std::string, std::pair<double, double>> sizes{
      {"Car", {80, 60}}, {"Person", {30, 70}}, {"Bus", {140, 90}}, {"Truck", {120, 80}}};
  auto it = sizes.find(label);
  if (it == sizes.end()) return 60;
  return height ? it->second.second : it->second.first;
}

// Position on a segment of length `span`, bouncing off both ends.
double reflect(double pos, double span) {
  if (span <= 0) return 0;
  double u = std::fmod(pos, 2 * span);
  if (u < 0) u += 2 * span;
  return u > span ? 2 * span - u : u;
}

std::mt19937_64 seeded(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

std::vector<Actor> cast_actors(const SyntheticStreamSpec& spec, std::uint64_t seed, int producer) {
  std::vector<Actor> actors;
  auto rng = seeded({seed, static_cast<std::uint64_t>(producer), 0});
  std::int64_t next_id = 1;
  const auto end_ms = static_cast<std::int64_t>(std::llround(spec.duration_s * 1000));

  const auto& bg = spec.background;
  std::vector<std::string> names;
  std::vector<double> weights;
  for (const auto& [k, v] : bg.labels) {
    names.push_back(k);
    weights.push_back(v);
  }
  std::uniform_int_distribution<int> how_many(bg.min_objects, bg.max_objects);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = how_many(rng);
  for (int i = 0; i < n; ++i) {
    Actor a;
    a.id = next_id++;
    a.label = names[pick(rng)];
    a.w = default_size(a.label, false);
    a.h = default_size(a.label, true);
    a.x = unit(rng) * std::max(0.0, spec.width - a.w);
    a.y = unit(rng) * std::max(0.0, spec.height - a.h);
    const double speed = bg.min_speed + unit(rng) * (bg.max_speed - bg.min_speed);
    const double angle = unit(rng) * 2 * M_PI;
    a.vx = speed * std::cos(angle);
    a.vy = speed * std::sin(angle);
    a.start_ms = 0;
    a.end_ms = end_ms;
    actors.push_back(std::move(a));
  }

  const double period = spec.repeat_s.value_or(spec.duration_s);
  const int reps = spec.repeat_s ? static_cast<int>(std::ceil(spec.duration_s / period)) : 1;
  for (int r = 0; r < reps; ++r) {
    for (const auto& s : spec.script) {
      for (int i = 0; i < s.count; ++i) {
        Actor a;
        a.id = next_id++;
        a.label = s.label;
        a.color = s.color;
        a.start_ms = std::llround((s.start_s + r * period) * 1000);
        a.end_ms = std::llround((s.end_s + r * period) * 1000);
        a.x = s.x + i * s.spacing;
        a.y = s.y;
        a.vx = s.vx;
        a.vy = s.vy;
        a.w = s.width;
        a.h = s.height;
        a.confidence = s.confidence;
        actors.push_back(std::move(a));
      }
    }
  }
  for (auto& a : actors)
    a.rng = seeded({seed, static_cast<std::uint64_t>(producer), static_cast<std::uint64_t>(a.id)});
  return actors;
}

}  // namespace

GeneratedStream generate_stream(const SyntheticStreamSpec& spec, std::uint64_t seed) {
  GeneratedStream out;
  const auto frames = static_cast<std::int64_t>(std::ceil(spec.duration_s * spec.fps - 1e-9));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int p = 0; p < spec.producers; ++p) {
    GeneratedProducer gp;
    gp.producer_id = producer_name(p, spec.producers);
    auto actors = cast_actors(spec, seed, p);

    for (std::int64_t f = 0; f < frames; ++f) {
      TruthFrame clean;
      clean.frame_index = f;
      clean.timestamp_ms = std::llround(static_cast<double>(f) * 1000.0 / spec.fps);
      FrameDetections noisy{gp.producer_id, f, clean.timestamp_ms, {}};

      for (auto& a : actors) {
        if (clean.timestamp_ms < a.start_ms || clean.timestamp_ms >= a.end_ms) continue;
        if (a.first_frame < 0) a.first_frame = f;
        const double t = static_cast<double>(f - a.first_frame);
        // Fixed draw order per frame keeps noise streams aligned across knobs.
        const double u_conf = unit(a.rng), u_drop = unit(a.rng), u_jit = unit(a.rng),
                     u_bx = unit(a.rng), u_by = unit(a.rng);

        DetectionRecord rec;
        rec.label = a.label;
        rec.confidence = a.confidence.value_or(0.6 + 0.35 * u_conf);
        rec.bbox = {reflect(a.x + a.vx * t, spec.width - a.w),
                    reflect(a.y + a.vy * t, spec.height - a.h), a.w, a.h};
        if (!a.color.empty()) rec.attributes["color"] = a.color;
        clean.detections.push_back({a.id, rec});

        if (u_drop < spec.noise.dropout) continue;
        const auto& n = spec.noise;
        rec.confidence = std::clamp(rec.confidence + (2 * u_jit - 1) * n.confidence_jitter, 0.0, 1.0);
        rec.bbox.x_min = std::max(0.0, rec.bbox.x_min + (2 * u_bx - 1) * n.bbox_jitter);
        rec.bbox.y_min = std::max(0.0, rec.bbox.y_min + (2 * u_by - 1) * n.bbox_jitter);
        noisy.detections.push_back(std::move(rec));
      }
      gp.lines.push_back(serialize_detection_line(noisy));
      gp.clean.push_back(std::move(clean));
    }
    out.producers.push_back(std::move(gp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth

std::vector<std::pair<std::string, std::string>> expand_queries(const SyntheticStreamSpec& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [id, text] : spec.queries) {
    auto ast = veql::parse_veql(text);
    for (int p = 0; p < spec.producers; ++p) {
      ast.producer = producer_name(p, spec.producers);
      out.emplace_back(spec.producers > 1 ? id + "@" + ast.producer : id, veql::render_veql(ast));
    }
  }
  return out;
}

namespace {

bool passes(const veql::QueryPlan& plan, const std::vector<double>& ps) {
  return !ps.empty() && plan.confidence.satisfied_by(confidence_score(ps));
}

bool pattern_present(const WindowState& w, const veql::QueryPlan& plan) {
  auto matches = [](const veql::QueryNode* q, const ObjectNode& n) { return q->matches(n); };

  if (plan.count) {
    const auto* q = plan.node(plan.count->key);
    std::vector<std::size_t> counts;
    for (const auto& g : w.graphs)
      counts.push_back(static_cast<std::size_t>(
          std::count_if(g->nodes.begin(), g->nodes.end(), [&](const auto& n) { return matches(q, n); })));
    std::optional<std::size_t> pick;
    if (plan.count->per_frame) {
      if (counts.empty() ||
          !std::all_of(counts.begin(), counts.end(), [&](auto c) { return plan.count->satisfied_by(c); }))
        return false;
      pick = static_cast<std::size_t>(std::min_element(counts.begin(), counts.end()) - counts.begin());
    } else {
      for (std::size_t i = 0; i < counts.size() && !pick; ++i)
        if (plan.count->satisfied_by(counts[i])) pick = i;
      if (!pick) return false;
    }
    std::vector<double> ps;
    for (const auto& n : w.graphs[*pick]->nodes)
      if (matches(q, n)) ps.push_back(n.confidence);
    return passes(plan, ps);
  }

  if (plan.spatial) {
    const auto* s = plan.node(plan.spatial->subject_key);
    const auto* r = plan.node(plan.spatial->reference_key);
    for (const auto& g : w.graphs)
      for (const auto& a : g->nodes)
        for (const auto& b : g->nodes)
          if (a.id != b.id && matches(s, a) && matches(r, b) &&
              bsf(plan.spatial->relation, a, b) == 1 && passes(plan, {a.confidence, b.confidence}))
            return true;
    return false;
  }

  if (plan.temporal) {
    const auto& keys = plan.temporal->key_order;
    std::vector<std::vector<const ObjectNode*>> lists(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k)
      for (const auto& g : w.graphs)
        for (const auto& n : g->nodes)
          if (matches(plan.node(keys[k]), n)) lists[k].push_back(&n);

    const auto op = plan.temporal->op;
    if (op == TemporalOperator::Disj) {
      for (const auto& l : lists)
        for (const auto* n : l)
          if (passes(plan, {n->confidence})) return true;
      return false;
    }
    std::vector<const ObjectNode*> tuple;
    std::function<bool(std::size_t)> search = [&](std::size_t k) {
      if (k == keys.size()) {
        std::vector<double> ps;
        for (const auto* n : tuple) ps.push_back(n->confidence);
        return passes(plan, ps);
      }
      for (const auto* n : lists[k]) {
        if (std::any_of(tuple.begin(), tuple.end(), [&](const auto* t) { return t->id == n->id; }))
          continue;
        if (!tuple.empty()) {
          if (op == TemporalOperator::Seq && n->timestamp_ms <= tuple.back()->timestamp_ms) continue;
          if (op == TemporalOperator::Eq && n->timestamp_ms != tuple.back()->timestamp_ms) continue;
        }
        tuple.push_back(n);
        const bool found = search(k + 1);
        tuple.pop_back();
        if (found) return true;
      }
      return false;
    };
    return search(0);
  }

  const auto* q = &plan.nodes.front();
  for (const auto& g : w.graphs)
    for (const auto& n : g->nodes)
      if (matches(q, n) && passes(plan, {n.confidence})) return true;
  return false;
}

}  // namespace

std::vector<GroundTruthEvent> ground_truth(const SyntheticStreamSpec& spec,
                                           const GeneratedStream& stream) {
  std::vector<GroundTruthEvent> out;
  const auto queries = expand_queries(spec);
  for (const auto& gp : stream.producers) {
    std::vector<GraphPtr> graphs;
    for (const auto& f : gp.clean) {
      auto g = std::make_shared<VEKGGraph>();
      g->producer_id = gp.producer_id;
      g->frame_index = f.frame_index;
      g->timestamp_ms = f.timestamp_ms;
      for (const auto& d : f.detections)
        g->nodes.push_back({d.actor, d.record.label, d.record.confidence, d.record.attributes,
                            d.record.bbox, std::nullopt, f.frame_index, f.timestamp_ms});
      graphs.push_back(std::move(g));
    }
    for (const auto& [id, text] : queries) {
      const auto plan = veql::compile_query(veql::parse_veql(text), id);
      if (plan.producer != gp.producer_id) continue;
      WindowAssigner assigner(WindowConfig::from_spec(plan.window, id, gp.producer_id));
      std::vector<WindowState> states;
      for (const auto& g : graphs)
        for (auto& s : assigner.accept(g)) states.push_back(std::move(s));
      for (auto& s : assigner.flush()) states.push_back(std::move(s));
      for (const auto& s : states)
        out.push_back({id, gp.producer_id, s.window_start_ms, s.window_end_ms, pattern_present(s, plan)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring and summaries

double f_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

std::map<std::string, Score> score(const std::vector<MatchNotification>& notifications,
                                   const std::vector<GroundTruthEvent>& truth) {
  using Key = std::tuple<std::string, std::string, std::int64_t, std::int64_t>;
  std::set<Key> predicted;
  for (const auto& n : notifications)
    predicted.emplace(n.query_id, n.producer_id, n.window_start_ms, n.window_end_ms);

  std::map<std::string, Score> out;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> windows;  // hits, scored
  std::set<Key> known;
  auto tally = [&](const std::string& q, bool want, bool got) {
    for (const auto& name : {q, std::string("all")}) {
      auto& s = out[name];
      if (want && got) ++s.tp;
      else if (got) ++s.fp;
      else if (want) ++s.fn;
      else ++s.tn;
      if (want || got) {
        ++windows[name].second;
        windows[name].first += want && got;
      }
    }
  };
  for (const auto& t : truth) {
    Key k{t.query_id, t.producer_id, t.window_start_ms, t.window_end_ms};
    known.insert(k);
    tally(t.query_id, t.expected, predicted.count(k) > 0);
  }
  for (const auto& k : predicted)
    if (!known.count(k)) tally(std::get<0>(k), false, true);

  for (auto& [name, s] : out) {
    s.precision = s.tp + s.fp ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp)
                              : (s.fn == 0 ? 1.0 : 0.0);
    s.recall = s.tp + s.fn ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn)
                           : (s.fp == 0 ? 1.0 : 0.0);
    s.f = f_score(s.precision, s.recall);
    const auto [hits, scored] = windows[name];
    s.f_per_window = scored ? static_cast<double>(hits) / static_cast<double>(scored) : 1.0;
  }
  return out;
}

LatencySummary summarize(std::vector<double> values) {
  LatencySummary s;
  s.samples = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  auto rank = [&](double q) {
    const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(i, 1, values.size()) - 1];
  };
  s.p50 = rank(0.5);
  s.p99 = rank(0.99);
  return s;
}

double system_latency(double mean_representation_ms, double matcher_ms) {
  return mean_representation_ms + matcher_ms;
}

double throughput_fps(std::uint64_t frames, double wall_seconds) {
  return wall_seconds > 0 ? static_cast<double>(frames) / wall_seconds : 0.0;
}

// ---------------------------------------------------------------------------
// Runs

RunOutput run_engine(const SyntheticStreamSpec& spec, const GeneratedStream& stream,
                     EngineOptions opts) {
  Engine engine(opts);
  for (const auto& gp : stream.producers)
    engine.add_producer(gp.producer_id, std::make_unique<MemorySource>(gp.lines));
  for (const auto& [id, text] : expand_queries(spec)) engine.register_query(id, text);
  engine.validate();

  CollectingSink sink;
  const auto result = engine.run(sink);
  if (result.status == RunStatus::Aborted) throw std::runtime_error("engine run aborted: " + result.error);

  RunOutput out;
  out.notifications = sink.take();
  std::stable_sort(out.notifications.begin(), out.notifications.end(), [](const auto& a, const auto& b) {
    return std::tie(a.query_id, a.producer_id, a.window_start_ms) <
           std::tie(b.query_id, b.producer_id, b.window_start_ms);
  });
  const auto& m = engine.metrics();
  out.frames = m.frames_processed;
  out.wall_seconds = m.wall_seconds;
  out.samples = m.all_samples();
  for (const auto& [id, q] : m.queries) out.suppressed[id] = q->suppressed.load();
  return out;
}

std::vector<SweepPoint> throughput_sweep(const SyntheticStreamSpec& spec, std::uint64_t seed) {
  std::vector<SweepPoint> out;
  for (int n : spec.producer_sweep) {
    auto s = spec;
    s.producers = n;
    const auto stream = generate_stream(s, seed);
    const auto run = run_engine(s, stream);
    out.push_back({n, run.frames, run.wall_seconds, throughput_fps(run.frames, run.wall_seconds)});
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f.precision(17);
  return f;
}

}  // namespace

BenchReport run_bench(const SyntheticStreamSpec& spec, std::uint64_t seed,
                      const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto stream = generate_stream(spec, seed);
  {
    auto f = open_out(out_dir / "stream.jsonl");
    for (const auto& gp : stream.producers)
      for (const auto& l : gp.lines) f << l << '\n';
  }
  const auto truth = ground_truth(spec, stream);
  {
    auto f = open_out(out_dir / "ground_truth.csv");
    f << "query_id,producer_id,window_start_ms,window_end_ms,expected\n";
    for (const auto& t : truth)
      f << t.query_id << ',' << t.producer_id << ',' << t.window_start_ms << ',' << t.window_end_ms
        << ',' << (t.expected ? 1 : 0) << '\n';
  }

  const auto run = run_engine(spec, stream);
  {
    auto f = open_out(out_dir / "notifications.jsonl");
    for (const auto& n : run.notifications) f << to_json_line(n) << '\n';
  }
  {
    auto f = open_out(out_dir / "latency_samples.csv");
    write_latency_csv(f, run.samples);
  }

  BenchReport r;
  r.scores = score(run.notifications, truth);
  std::map<std::string, std::vector<double>> matcher, system;
  for (const auto& s : run.samples) {
    matcher[s.query_id].push_back(s.matcher_ms);
    system[s.query_id].push_back(system_latency(s.representation_ms, s.matcher_ms));
  }
  for (auto& [q, v] : matcher) r.matcher_latency[q] = summarize(std::move(v));
  for (auto& [q, v] : system) r.system_latency[q] = summarize(std::move(v));
  r.throughput = throughput_fps(run.frames, run.wall_seconds);
  r.sweep = throughput_sweep(spec, seed);

  auto f = open_out(out_dir / "metrics.csv");
  f << "scope,name,metric,value\n";
  for (const auto& [q, s] : r.scores) {
    const std::pair<const char*, double> rows[] = {
        {"tp", static_cast<double>(s.tp)}, {"fp", static_cast<double>(s.fp)},
        {"fn", static_cast<double>(s.fn)}, {"tn", static_cast<double>(s.tn)},
        {"precision", s.precision},        {"recall", s.recall},
        {"f_pooled", s.f},                 {"f_per_window", s.f_per_window}};
    for (const auto& [metric, v] : rows) f << "score," << q << ',' << metric << ',' << v << '\n';
  }
  auto latency_rows = [&](const char* scope, const std::map<std::string, LatencySummary>& m) {
    for (const auto& [q, s] : m) {
      f << scope << ',' << q << ",samples," << s.samples << '\n';
      f << scope << ',' << q << ",mean_ms," << s.mean << '\n';
      f << scope << ',' << q << ",p50_ms," << s.p50 << '\n';
      f << scope << ',' << q << ",p99_ms," << s.p99 << '\n';
    }
  };
  latency_rows("matcher_latency", r.matcher_latency);
  latency_rows("system_latency", r.system_latency);
  for (const auto& [q, n] : run.suppressed) f << "suppressed," << q << ",count," << n << '\n';
  f << "run,all,frames," << run.frames << '\n';
  f << "run,all,wall_seconds," << run.wall_seconds << '\n';
  f << "run,all,throughput_fps," << r.throughput << '\n';
  for (const auto& p : r.sweep) {
    f << "sweep," << p.producers << ",frames," << p.frames << '\n';
    f << "sweep," << p.producers << ",wall_seconds," << p.wall_seconds << '\n';
    f << "sweep," << p.producers << ",throughput_fps," << p.fps << '\n';
  }
  return r;
}

}  // namespace cep::bench
