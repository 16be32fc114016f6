#include "cep/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace cep {

using veql::PatternKind;
using veql::QueryPlan;

std::size_t ObjectEvents::total() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.events.size();
  return n;
}

double confidence_score(std::span<const double> probabilities) {
  double num = 0.0, den = 0.0;
  for (double p : probabilities) {
    p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double w = -std::log2(p);
    num += p * w;
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

double confidence_score(std::span<const BoundEvent> events) {
  std::vector<double> ps;
  ps.reserve(events.size());
  for (const auto& e : events) ps.push_back(e.probability);
  return confidence_score(ps);
}

bool same_content(const MatchNotification& a, const MatchNotification& b) {
  return a.query_id == b.query_id && a.producer_id == b.producer_id &&
         a.window_start_ms == b.window_start_ms && a.window_end_ms == b.window_end_ms &&
         a.pattern_kind == b.pattern_kind && a.bound_events == b.bound_events &&
         a.confidence == b.confidence && a.truncated == b.truncated;
}

std::string to_json_line(const MatchNotification& n) {
  nlohmann::json j;
  j["query_id"] = n.query_id;
  j["producer_id"] = n.producer_id;
  j["window"] = {n.window_start_ms, n.window_end_ms};
  j["pattern_kind"] = veql::to_string(n.pattern_kind);
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : n.bound_events) {
    events.push_back({{"key", e.key},
                      {"node_id", e.node_id},
                      {"label", e.label},
                      {"frame_index", e.frame_index},
                      {"timestamp_ms", e.timestamp_ms},
                      {"probability", e.probability}});
  }
  j["events"] = std::move(events);
  j["confidence"] = n.confidence;
  j["truncated"] = n.truncated;
  return j.dump();
}

MatchNotification parse_notification_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line.begin(), line.end());
  MatchNotification n;
  n.query_id = j.at("query_id").get<std::string>();
  n.producer_id = j.at("producer_id").get<std::string>();
  n.window_start_ms = j.at("window").at(0).get<std::int64_t>();
  n.window_end_ms = j.at("window").at(1).get<std::int64_t>();
  const auto kind = j.at("pattern_kind").get<std::string>();
  for (auto k : {PatternKind::Object, PatternKind::Spatial, PatternKind::Temporal,
                 PatternKind::Count})
    if (veql::to_string(k) == kind) n.pattern_kind = k;
  for (const auto& e : j.at("events")) {
    n.bound_events.push_back({e.at("key").get<std::string>(), e.at("node_id").get<NodeId>(),
                              e.at("label").get<std::string>(),
                              e.at("frame_index").get<std::int64_t>(),
                              e.at("timestamp_ms").get<std::int64_t>(),
                              e.at("probability").get<double>()});
  }
  n.confidence = j.at("confidence").get<double>();
  n.truncated = j.at("truncated").get<bool>();
  return n;
}

namespace {

ObjectEvent make_event(const std::string& key, const ObjectNode& node) {
  return {key, &node, node.confidence, node.frame_index, node.timestamp_ms};
}

BoundEvent bind(const ObjectEvent& e) {
  return {e.key, e.node->id, e.node->label, e.frame_index, e.timestamp_ms, e.probability};
}

}  // namespace

ObjectEvents match_objects(const WindowState& state, const QueryPlan& plan) {
  ObjectEvents out;
  out.frames.reserve(state.graphs.size());
  for (const auto& g : state.graphs) {
    FrameEvents fe{g.get(), {}};
    for (const auto& qn : plan.nodes)
      for (const auto& node : g->nodes)
        if (qn.matches(node)) fe.events.push_back(make_event(qn.key, node));
    out.frames.push_back(std::move(fe));
  }
  return out;
}

std::vector<SpatialMatch> match_spatial(const ObjectEvents& events, const QueryPlan& plan,
                                        EdgeOverlay* overlay) {
  std::vector<SpatialMatch> out;
  if (!plan.spatial) return out;
  const auto& step = *plan.spatial;
  const std::string relation = to_string(step.relation);
  for (const auto& frame : events.frames) {
    for (const auto& subj : frame.events) {
      if (subj.key != step.subject_key) continue;
      for (const auto& ref : frame.events) {
        if (ref.key != step.reference_key || ref.node->id == subj.node->id) continue;
        const int holds = bsf(step.relation, *subj.node, *ref.node);
        if (overlay)
          (*overlay)[frame.graph->frame_index][{subj.node->id, ref.node->id}] =
              SpatialEdge{relation, static_cast<double>(holds)};
        if (holds) out.push_back({frame.graph->frame_index, subj, ref});
      }
    }
  }
  return out;
}

TemporalResult match_temporal(const ObjectEvents& events, const QueryPlan& plan,
                              std::size_t cap) {
  if (!plan.temporal) return {};
  const auto& keys = plan.temporal->key_order;
  EventMap map;
  for (const auto& k : keys) map.ensure_key(k);
  for (const auto& frame : events.frames)
    for (const auto& e : frame.events)
      if (map.contains(e.key)) map.add({e.key, e.node, e.timestamp_ms, e.frame_index});
  if (map.populated_keys() == 0) return {};
  return eval_temporal(plan.temporal->op, map, keys, {.cap = cap, .distinct_nodes = true});
}

std::optional<CountMatch> match_count(const WindowState& state, const QueryPlan& plan) {
  if (!plan.count || state.graphs.empty()) return std::nullopt;
  const auto& step = *plan.count;
  const veql::QueryNode* qn = plan.node(step.key);
  if (!qn) return std::nullopt;

  std::optional<std::size_t> pick;
  std::size_t pick_count = 0;
  for (std::size_t i = 0; i < state.graphs.size(); ++i) {
    const std::size_t c =
        msf_count(*state.graphs[i], [&](const ObjectNode& n) { return qn->matches(n); });
    const bool ok = step.satisfied_by(c);
    if (step.per_frame) {
      if (!ok) return std::nullopt;
      if (!pick || c < pick_count) pick = i, pick_count = c;
    } else if (ok) {
      pick = i, pick_count = c;
      break;
    }
  }
  if (!pick) return std::nullopt;

  const VEKGGraph& g = *state.graphs[*pick];
  CountMatch m{g.frame_index, pick_count, {}};
  for (const auto& node : g.nodes)
    if (qn->matches(node)) m.events.push_back(make_event(step.key, node));
  return m;
}

WindowResult evaluate_window(const WindowState& state, const QueryPlan& plan,
                             const MatcherOptions& opts) {
  WindowResult result;
  const PatternKind kind = plan.kind();

  auto emit = [&](std::vector<BoundEvent> bound, bool truncated) {
    if (bound.empty()) {
      ++result.suppressed;
      return;
    }
    MatchNotification n;
    n.query_id = plan.query_id;
    n.producer_id = state.producer_id;
    n.window_start_ms = state.window_start_ms;
    n.window_end_ms = state.window_end_ms;
    n.pattern_kind = kind;
    n.confidence = confidence_score(bound);
    n.bound_events = std::move(bound);
    n.truncated = truncated;
    if (!plan.confidence.satisfied_by(n.confidence)) {
      ++result.suppressed;
      return;
    }
    n.emitted_at = Clock::now();
    result.notifications.push_back(std::move(n));
  };

  if (kind == PatternKind::Count) {
    if (auto m = match_count(state, plan)) {
      std::vector<BoundEvent> bound;
      for (const auto& e : m->events) bound.push_back(bind(e));
      emit(std::move(bound), false);
    }
    return result;
  }

  const ObjectEvents events = match_objects(state, plan);
  switch (kind) {
    case PatternKind::Object:
      for (const auto& frame : events.frames)
        for (const auto& e : frame.events) emit({bind(e)}, false);
      break;
    case PatternKind::Spatial:
      for (const auto& m : match_spatial(events, plan, &result.edges))
        emit({bind(m.subject), bind(m.reference)}, false);
      break;
    case PatternKind::Temporal: {
      TemporalResult tr = match_temporal(events, plan, opts.combination_cap);
      result.truncated = tr.truncated;
      result.seq_combinations = tr.total;
      for (const auto& m : tr.matches) {
        std::vector<BoundEvent> bound;
        bound.reserve(m.bound_events.size());
        for (const auto& occ : m.bound_events)
          bound.push_back({occ.key, occ.node->id, occ.node->label, occ.frame_index,
                           occ.timestamp_ms, occ.node->confidence});
        emit(std::move(bound), tr.truncated);
      }
      break;
    }
    case PatternKind::Count: break;
  }
  return result;
}

}  // namespace cep
