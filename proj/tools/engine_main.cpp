#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "cep/bench.hpp"
#include "cep/engine.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("engine");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("ENGINE_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cep::ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
    throw cep::ConfigError(std::string(what) + " expects id=path, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

void print_query_error(const cep::veql::QueryError& e, const std::string& where) {
  std::cerr << where << ": " << e.what() << '\n';
  if (!e.expected().empty()) {
    std::cerr << "  expected one of:";
    for (const auto& x : e.expected()) std::cerr << ' ' << x;
    std::cerr << '\n';
  }
}

struct RunArgs {
  std::string config;
  std::vector<std::string> inputs;
  std::vector<std::string> queries;
  std::string output;
  std::string metrics;
  std::string latency_csv;
  std::string state_dump;
  std::size_t cap = 0;
  std::size_t queue = 0;
};

int cmd_run(const RunArgs& a) {
  cep::EngineConfig cfg;
  if (!a.config.empty()) cfg = cep::load_config(a.config);
  if (!a.inputs.empty()) {
    cfg.producers.clear();
    for (const auto& s : a.inputs) {
      auto [id, path] = split_assignment(s, "--input");
      cfg.producers.push_back({id, path});
    }
  }
  if (!a.queries.empty()) {
    cfg.queries.clear();
    for (const auto& s : a.queries) {
      auto [id, path] = split_assignment(s, "--query");
      cfg.queries.push_back({id, path});
    }
  }
  if (!a.output.empty()) cfg.output = a.output;
  if (!a.metrics.empty()) cfg.metrics = a.metrics;
  if (!a.latency_csv.empty()) cfg.latency_csv = a.latency_csv;
  if (!a.state_dump.empty()) cfg.state_dump = a.state_dump;
  if (a.cap) cfg.combination_cap = a.cap;
  if (a.queue) cfg.queue_capacity = a.queue;
  if (cfg.producers.empty()) throw cep::ConfigError("no producers configured");
  if (cfg.queries.empty()) throw cep::ConfigError("no queries configured");

  std::ofstream dump;
  cep::EngineOptions opts;
  opts.tracking = cfg.tracking;
  opts.queue_capacity = cfg.queue_capacity;
  opts.producer_queue_capacity = cfg.producer_queue_capacity;
  opts.combination_cap = cfg.combination_cap;
  opts.stop = &g_stop;
  if (!cfg.state_dump.empty()) {
    dump.open(cfg.state_dump);
    if (!dump) throw cep::ConfigError("cannot write " + cfg.state_dump);
    opts.state_dump = &dump;
  }

  cep::Engine engine(opts);
  for (const auto& q : cfg.queries) {
    try {
      engine.register_query(q.id, read_file(q.path));
    } catch (const cep::veql::QueryError& e) {
      print_query_error(e, q.path);
      return kConfigError;
    }
  }
  for (const auto& p : cfg.producers) {
    try {
      engine.add_producer(p.id, cep::open_source(p.source));
    } catch (const cep::ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw cep::ConfigError("producer '" + p.id + "': " + e.what());
    }
  }
  engine.validate();

  std::unique_ptr<cep::NotificationSink> sink;
  if (cfg.output == "-")
    sink = std::make_unique<cep::StreamSink>(std::cout);
  else
    sink = std::make_unique<cep::FileSink>(cfg.output);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto result = engine.run(*sink);

  const auto& m = engine.metrics();
  if (!cfg.metrics.empty()) {
    std::ofstream f(cfg.metrics);
    cep::write_metrics_json(f, m);
  }
  if (!cfg.latency_csv.empty()) {
    std::ofstream f(cfg.latency_csv);
    cep::write_latency_csv(f, m.all_samples());
  }
  spdlog::info("processed {} frames in {:.3f} s ({:.1f} fps)", m.frames_processed, m.wall_seconds,
               m.throughput_fps());

  if (result.status == cep::RunStatus::Aborted) {
    std::cerr << "engine: " << result.error << '\n';
    return kRuntimeError;
  }
  if (result.status == cep::RunStatus::Interrupted) spdlog::warn("interrupted; windows flushed");
  return kOk;
}

int cmd_check(const std::string& path) {
  const auto text = read_file(path);
  try {
    const auto plan = cep::veql::compile_query(cep::veql::parse_veql(text), "query");
    std::cout << cep::veql::describe(plan);
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << '\n';
  } catch (const cep::veql::QueryError& e) {
    print_query_error(e, path);
    return kConfigError;
  }
  return kOk;
}

int cmd_dump_graph(const std::string& input, std::int64_t frame) {
  std::ifstream in(input);
  if (!in) throw cep::ConfigError("cannot open " + input);
  cep::GraphBuilder builder;
  cep::SequenceGate gate;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    cep::FrameDetections f;
    try {
      f = cep::parse_detection_line(line);
    } catch (const cep::IngestError& e) {
      std::cerr << input << ":" << lineno << ": " << e.what() << '\n';
      return kConfigError;
    }
    if (!gate.admit(f)) continue;
    auto g = builder.build(f);
    if (g->frame_index == frame) {
      std::cout << cep::dump_vekg(*g);
      return kOk;
    }
  }
  std::cerr << "frame " << frame << " not found in " << input << '\n';
  return kConfigError;
}

int cmd_bench(const std::string& spec_path, std::uint64_t seed, const std::string& out) {
  const auto spec = cep::bench::load_spec(spec_path);
  const auto r = cep::bench::run_bench(spec, seed, out);
  for (const auto& [q, s] : r.scores)
    std::cout << q << ": precision " << s.precision << " recall " << s.recall << " f " << s.f
              << " (per-window " << s.f_per_window << ")\n";
  for (const auto& [q, l] : r.matcher_latency)
    std::cout << q << ": matcher latency mean " << l.mean << " ms, p99 " << l.p99 << " ms\n";
  std::cout << "throughput " << r.throughput << " fps\n";
  for (const auto& p : r.sweep) std::cout << "sweep " << p.producers << " producers: " << p.fps << " fps\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Video event pattern engine"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run queries over detection streams");
  run_cmd->add_option("--config", run.config, "INI configuration file");
  run_cmd->add_option("--input", run.inputs, "producer=path or producer=host:port");
  run_cmd->add_option("--query", run.queries, "id=path of a VEQL file");
  run_cmd->add_option("--output", run.output, "notification file, or - for stdout");
  run_cmd->add_option("--metrics", run.metrics, "JSON metrics summary");
  run_cmd->add_option("--latency-csv", run.latency_csv, "per-window latency samples");
  run_cmd->add_option("--state-dump", run.state_dump, "sealed window records");
  run_cmd->add_option("--combination-cap", run.cap, "temporal matches per window");
  run_cmd->add_option("--queue-capacity", run.queue, "matcher queue length");

  std::string check_path;
  auto* check_cmd = app.add_subcommand("check", "Parse and compile a query");
  check_cmd->add_option("--query", check_path, "VEQL file")->required();

  std::string dump_input;
  std::int64_t dump_frame = 0;
  auto* dump_cmd = app.add_subcommand("dump-graph", "Print the knowledge graph of one frame");
  dump_cmd->add_option("--input", dump_input, "detection JSONL file")->required();
  dump_cmd->add_option("--frame", dump_frame, "frame index")->required();

  std::string bench_spec, bench_out;
  std::uint64_t bench_seed = 0;
  auto* bench_cmd = app.add_subcommand("bench", "Generate a synthetic stream and measure it");
  bench_cmd->add_option("--spec", bench_spec, "JSON stream spec")->required();
  bench_cmd->add_option("--seed", bench_seed, "generator seed");
  bench_cmd->add_option("--out", bench_out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*check_cmd) return cmd_check(check_path);
    if (*dump_cmd) return cmd_dump_graph(dump_input, dump_frame);
    if (*bench_cmd) return cmd_bench(bench_spec, bench_seed, bench_out);
  } catch (const cep::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const cep::bench::SpecError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const cep::veql::QueryError& e) {
    print_query_error(e, "query");
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
