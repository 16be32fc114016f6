#include "cep/engine.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstring>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"

namespace cep {

namespace {

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

// ---------------------------------------------------------------------------
// Sources

FileSource::FileSource(const std::filesystem::path& path) : in_(path) {
  if (!in_) throw ConfigError("cannot open input " + path.string());
}

std::optional<std::string> FileSource::next_line(const StopFn& stop) {
  std::string line;
  while (!stop() && std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  return std::nullopt;
}

std::optional<std::string> MemorySource::next_line(const StopFn& stop) {
  while (!stop() && pos_ < lines_.size()) {
    std::string& l = lines_[pos_++];
    if (!l.empty()) return std::move(l);
  }
  return std::nullopt;
}

TcpSource::TcpSource(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw ConfigError("cannot resolve " + host + ":" + port + ": " + gai_strerror(rc));
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  freeaddrinfo(res);
  if (fd_ < 0) throw ConfigError("cannot connect to " + host + ":" + port);
}

TcpSource::~TcpSource() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<std::string> TcpSource::next_line(const StopFn& stop) {
  while (true) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      return std::exchange(buffer_, {});
    }
    if (stop()) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 200);
    if (ready < 0 && errno != EINTR) return std::nullopt;
    if (ready <= 0) continue;
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      eof_ = true;
      continue;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<LineSource> open_source(const std::string& spec) {
  if (!std::filesystem::exists(spec)) {
    const auto colon = spec.rfind(':');
    if (colon != std::string::npos && all_digits(std::string_view(spec).substr(colon + 1)))
      return std::make_unique<TcpSource>(spec.substr(0, colon), spec.substr(colon + 1));
  }
  return std::make_unique<FileSource>(spec);
}

// ---------------------------------------------------------------------------
// Sinks

void StreamSink::write(const MatchNotification& n) {
  std::string line = to_json_line(n);
  line.push_back('\n');
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  if (!out_) throw SinkError("notification sink write failed");
}

void StreamSink::close() {
  std::lock_guard lock(mu_);
  out_.flush();
  if (!out_) throw SinkError("notification sink flush failed");
}

FileSink::FileSink(const std::filesystem::path& path) : file_(path) {
  if (!file_) throw ConfigError("cannot open output " + path.string());
}

void FileSink::close() {
  inner_.close();
  file_.close();
}

void CollectingSink::write(const MatchNotification& n) {
  std::lock_guard lock(mu_);
  items_.push_back(n);
}

std::vector<MatchNotification> CollectingSink::take() {
  std::lock_guard lock(mu_);
  return std::exchange(items_, {});
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<LatencySample> EngineMetrics::all_samples() const {
  std::vector<LatencySample> out;
  for (const auto& [id, q] : queries) out.insert(out.end(), q->samples.begin(), q->samples.end());
  return out;
}

void write_metrics_json(std::ostream& out, const EngineMetrics& m) {
  nlohmann::json j;
  j["frames_processed"] = m.frames_processed;
  j["wall_seconds"] = m.wall_seconds;
  j["throughput_fps"] = m.throughput_fps();
  for (const auto& [id, p] : m.producers) {
    const double n = static_cast<double>(p->ingested.load());
    j["producers"][id] = {{"lines", p->lines.load()},
                          {"ingested", p->ingested.load()},
                          {"dropped_out_of_order", p->dropped_out_of_order.load()},
                          {"malformed", p->malformed.load()},
                          {"producer_mismatch", p->producer_mismatch.load()},
                          {"mean_representation_ms", n > 0 ? p->representation_ms / n : 0.0}};
  }
  for (const auto& [id, q] : m.queries) {
    double sum = 0, sys = 0;
    for (const auto& s : q->samples) {
      sum += s.matcher_ms;
      sys += s.system_ms;
    }
    const double n = static_cast<double>(q->samples.size());
    j["queries"][id] = {{"windows", q->windows.load()},
                        {"graphs", q->graphs.load()},
                        {"emitted", q->emitted.load()},
                        {"suppressed", q->suppressed.load()},
                        {"truncated_windows", q->truncated_windows.load()},
                        {"states_dropped", q->states_dropped.load()},
                        {"mean_matcher_latency_ms", n > 0 ? sum / n : 0.0},
                        {"mean_system_latency_ms", n > 0 ? sys / n : 0.0}};
  }
  out << j.dump(2) << '\n';
}

void write_latency_csv(std::ostream& out, const std::vector<LatencySample>& samples) {
  out << "query_id,producer_id,window_start_ms,window_end_ms,graph_count,queue_ms,matcher_ms,"
         "representation_ms,system_ms,notifications,seq_combinations,truncated\n";
  for (const auto& s : samples)
    out << s.query_id << ',' << s.producer_id << ',' << s.window_start_ms << ','
        << s.window_end_ms << ',' << s.graph_count << ',' << s.queue_ms << ',' << s.matcher_ms
        << ',' << s.representation_ms << ',' << s.system_ms << ',' << s.notifications << ','
        << s.seq_combinations << ',' << (s.truncated ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Configuration

EngineConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || p == "-") return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute() || !std::filesystem::exists(base / fp)) {
      // host:port sources and absolute paths pass through
      if (!fp.is_absolute() && p.find(':') == std::string::npos) return (base / fp).string();
      return p;
    }
    return (base / fp).string();
  };

  // Present keys must convert; absent keys keep their defaults.
  auto read = [&](const char* key, auto& field) {
    if (tree.get_child_optional(key)) field = tree.get<std::remove_reference_t<decltype(field)>>(key);
  };

  EngineConfig c;
  try {
    if (auto producers = tree.get_child_optional("producers"))
      for (const auto& [id, v] : *producers) c.producers.push_back({id, resolve(v.data())});
    if (auto queries = tree.get_child_optional("queries"))
      for (const auto& [id, v] : *queries) c.queries.push_back({id, resolve(v.data())});
    c.output = resolve(tree.get("engine.output", c.output));
    read("engine.queue_capacity", c.queue_capacity);
    read("engine.producer_queue_capacity", c.producer_queue_capacity);
    read("engine.combination_cap", c.combination_cap);
    read("engine.iou_threshold", c.tracking.iou_threshold);
    read("engine.cosine_threshold", c.tracking.cosine_sim_threshold);
    c.state_dump = resolve(tree.get("engine.state_dump", std::string()));
    c.metrics = resolve(tree.get("engine.metrics", std::string()));
    c.latency_csv = resolve(tree.get("engine.latency_csv", std::string()));
  } catch (const pt::ptree_error& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  if (c.queue_capacity == 0 || c.producer_queue_capacity == 0 || c.combination_cap == 0)
    throw ConfigError("capacities must be positive");
  return c;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(EngineOptions opts) : opts_(opts) {}
Engine::~Engine() = default;

void Engine::add_producer(std::string id, std::unique_ptr<LineSource> source) {
  for (const auto& [pid, _] : producers_)
    if (pid == id) throw ConfigError("duplicate producer id '" + id + "'");
  metrics_.producers[id] = std::make_unique<ProducerMetrics>();
  producers_.emplace_back(std::move(id), std::move(source));
}

const veql::QueryPlan& Engine::register_query(const std::string& id, std::string_view veql_text) {
  if (plans_.contains(id)) throw ConfigError("duplicate query id '" + id + "'");
  veql::QueryPlan plan = veql::compile_query(veql::parse_veql(veql_text), id);
  for (const auto& w : plan.warnings) spdlog::warn("query {}: {}", id, w);
  metrics_.queries[id] = std::make_unique<QueryMetrics>();
  query_order_.push_back(id);
  return plans_.emplace(id, std::move(plan)).first->second;
}

void Engine::validate() const {
  std::set<std::string> ids;
  for (const auto& [pid, _] : producers_) ids.insert(pid);
  for (const auto& qid : query_order_) {
    const auto& plan = plans_.at(qid);
    if (!ids.contains(plan.producer))
      throw ConfigError("query '" + qid + "' reads FROM unknown producer '" + plan.producer + "'");
  }
}

struct Engine::Impl {
  struct QueryRuntime {
    const veql::QueryPlan* plan;
    QueryMetrics* metrics;
    BoundedQueue<WindowState> queue;
    QueryRuntime(const veql::QueryPlan* p, QueryMetrics* m, std::size_t cap)
        : plan(p), metrics(m), queue(cap) {}
  };

  struct ProducerRuntime {
    std::string id;
    LineSource* source;
    ProducerMetrics* metrics;
    BoundedQueue<std::string> lines;
    std::vector<QueryRuntime*> queries;
    ProducerRuntime(std::string i, LineSource* s, ProducerMetrics* m, std::size_t cap)
        : id(std::move(i)), source(s), metrics(m), lines(cap) {}
  };

  const EngineOptions& opts;
  NotificationSink& sink;
  std::atomic<bool> stop{false};
  std::atomic<bool> aborted{false};
  std::mutex error_mu;
  std::string error;
  std::mutex dump_mu;
  std::vector<std::unique_ptr<QueryRuntime>> queries;
  std::vector<std::unique_ptr<ProducerRuntime>> producers;

  Impl(const EngineOptions& o, NotificationSink& s) : opts(o), sink(s) {}

  void abort(const std::string& what) {
    {
      std::lock_guard lock(error_mu);
      if (error.empty()) error = what;
    }
    aborted = true;
    stop = true;
    for (auto& p : producers) p->lines.close();
    for (auto& q : queries) q->queue.close();
  }

  void read(ProducerRuntime& p) {
    // Stop is either the engine's own flag or the caller's.
    const LineSource::StopFn should_stop = [&] {
      return stop.load() || (opts.stop && opts.stop->load());
    };
    while (!should_stop()) {
      std::optional<std::string> line;
      try {
        line = p.source->next_line(should_stop);
      } catch (const std::exception& e) {
        spdlog::error("producer {}: read failed: {}", p.id, e.what());
        break;
      }
      if (!line) break;
      p.metrics->lines.fetch_add(1, std::memory_order_relaxed);
      if (!p.lines.push(std::move(*line))) break;
    }
    p.lines.close();
  }

  void build(ProducerRuntime& p) {
    std::vector<WindowAssigner> assigners;
    for (auto* q : p.queries)
      assigners.emplace_back(WindowConfig::from_spec(q->plan->window, q->plan->query_id, p.id));
    IdSource ids;
    GraphPtr prev;
    SequenceGate gate;
    bool warned_mismatch = false;

    auto dispatch = [&](std::size_t qi, std::vector<WindowState> sealed) {
      for (auto& s : sealed) {
        if (opts.state_dump) {
          std::lock_guard lock(dump_mu);
          write_state_record(*opts.state_dump, s);
        }
        QueryRuntime& q = *p.queries[qi];
        const std::size_t n = s.graphs.size();
        if (dispatch_state(std::move(s), q.queue) == DispatchOutcome::Aborted) {
          q.metrics->states_dropped.fetch_add(1);
        } else {
          q.metrics->windows.fetch_add(1);
          q.metrics->graphs.fetch_add(n);
        }
      }
    };

    while (auto line = p.lines.pop()) {
      const auto t0 = Clock::now();
      FrameDetections frame;
      try {
        frame = parse_detection_line(*line);
      } catch (const IngestError& e) {
        p.metrics->malformed.fetch_add(1);
        spdlog::warn("producer {}: dropping malformed line: {}", p.id, e.what());
        continue;
      }
      const auto t1 = Clock::now();
      if (frame.producer_id != p.id) {
        p.metrics->producer_mismatch.fetch_add(1);
        if (!warned_mismatch)
          spdlog::warn("producer {}: records name producer '{}'; routing by configured id", p.id,
                       frame.producer_id);
        warned_mismatch = true;
        frame.producer_id = p.id;
      }
      if (!gate.admit(frame)) {
        p.metrics->dropped_out_of_order.fetch_add(1);
        spdlog::debug("producer {}: dropping out-of-order frame {}", p.id, frame.frame_index);
        continue;
      }
      VEKGGraph g = build_vekg(frame, prev.get(), opts.tracking, ids);
      const auto t2 = Clock::now();
      g.representation_ms = ms_between(t0, t2);
      p.metrics->parse_ms += ms_between(t0, t1);
      p.metrics->build_ms += ms_between(t1, t2);
      p.metrics->representation_ms += g.representation_ms;
      prev = std::make_shared<const VEKGGraph>(std::move(g));
      p.metrics->ingested.fetch_add(1, std::memory_order_relaxed);
      for (std::size_t qi = 0; qi < assigners.size(); ++qi) dispatch(qi, assigners[qi].accept(prev));
    }
    for (std::size_t qi = 0; qi < assigners.size(); ++qi) dispatch(qi, assigners[qi].flush());
    for (auto* q : p.queries) q->queue.close();
  }

  void match(QueryRuntime& q) {
    MatcherOptions mo{opts.combination_cap};
    while (auto state = q.queue.pop()) {
      const auto picked = Clock::now();
      WindowResult r = evaluate_window(*state, *q.plan, mo);
      try {
        for (const auto& n : r.notifications) {
          sink.write(n);
          q.metrics->emitted.fetch_add(1);
        }
      } catch (const std::exception& e) {
        abort(e.what());
        return;
      }
      const auto done = Clock::now();
      LatencySample s;
      s.query_id = q.plan->query_id;
      s.producer_id = state->producer_id;
      s.window_start_ms = state->window_start_ms;
      s.window_end_ms = state->window_end_ms;
      s.graph_count = state->graphs.size();
      s.matcher_ms = ms_between(picked, done);
      s.queue_ms = ms_between(state->sealed_at, picked);
      double rep = 0;
      for (const auto& g : state->graphs) rep += g->representation_ms;
      s.representation_ms = s.graph_count ? rep / static_cast<double>(s.graph_count) : 0.0;
      s.system_ms = s.representation_ms + s.matcher_ms;
      s.notifications = r.notifications.size();
      s.seq_combinations = r.seq_combinations;
      s.truncated = r.truncated;
      q.metrics->samples.push_back(s);
      q.metrics->suppressed.fetch_add(r.suppressed);
      if (r.truncated) q.metrics->truncated_windows.fetch_add(1);
    }
  }
};

RunResult Engine::run(NotificationSink& sink) {
  if (ran_) throw std::logic_error("Engine::run called twice");
  ran_ = true;
  validate();

  Impl impl(opts_, sink);
  std::map<std::string, Impl::ProducerRuntime*> by_id;
  for (auto& [id, src] : producers_) {
    impl.producers.push_back(std::make_unique<Impl::ProducerRuntime>(
        id, src.get(), metrics_.producers.at(id).get(), opts_.producer_queue_capacity));
    by_id[id] = impl.producers.back().get();
  }
  for (const auto& qid : query_order_) {
    const auto& plan = plans_.at(qid);
    impl.queries.push_back(std::make_unique<Impl::QueryRuntime>(
        &plan, metrics_.queries.at(qid).get(), opts_.queue_capacity));
    by_id.at(plan.producer)->queries.push_back(impl.queries.back().get());
  }

  const auto start = Clock::now();
  {
    std::vector<std::jthread> threads;
    for (auto& q : impl.queries) threads.emplace_back([&impl, qr = q.get()] { impl.match(*qr); });
    for (auto& p : impl.producers) {
      threads.emplace_back([&impl, pr = p.get()] { impl.build(*pr); });
      threads.emplace_back([&impl, pr = p.get()] { impl.read(*pr); });
    }
  }
  metrics_.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  metrics_.frames_processed = 0;
  for (const auto& [id, p] : metrics_.producers) metrics_.frames_processed += p->ingested.load();

  RunResult result;
  if (!impl.aborted) {
    try {
      sink.close();
    } catch (const std::exception& e) {
      impl.abort(e.what());
    }
  }
  if (impl.aborted) {
    result.status = RunStatus::Aborted;
    result.error = impl.error;
  } else if (opts_.stop && opts_.stop->load()) {
    result.status = RunStatus::Interrupted;
  }
  return result;
}

}  // namespace cep
