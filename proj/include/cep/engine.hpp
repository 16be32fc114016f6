#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cep/matcher.hpp"
#include "cep/veql.hpp"
#include "cep/vekg.hpp"

namespace cep {

/// Configuration problems detected before any thread starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Sources

class LineSource {
 public:
  virtual ~LineSource() = default;
  using StopFn = std::function<bool()>;

  /// Next non-empty line without its terminator; nullopt at end of stream
  /// or once `stop` returns true.
  virtual std::optional<std::string> next_line(const StopFn& stop) = 0;
};

class FileSource : public LineSource {
 public:
  explicit FileSource(const std::filesystem::path& path);
  std::optional<std::string> next_line(const StopFn& stop) override;

 private:
  std::ifstream in_;
};

class MemorySource : public LineSource {
 public:
  explicit MemorySource(std::vector<std::string> lines) : lines_(std::move(lines)) {}
  std::optional<std::string> next_line(const StopFn& stop) override;

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

/// Newline-delimited records over a TCP connection to host:port.
class TcpSource : public LineSource {
 public:
  TcpSource(const std::string& host, const std::string& port);
  ~TcpSource() override;
  std::optional<std::string> next_line(const StopFn& stop) override;

 private:
  int fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

/// A path to an existing file, or host:port for a socket.
std::unique_ptr<LineSource> open_source(const std::string& spec);

// ---------------------------------------------------------------------------
// Sinks

class NotificationSink {
 public:
  virtual ~NotificationSink() = default;
  /// Called concurrently by matchers; implementations serialize lines.
  virtual void write(const MatchNotification& n) = 0;
  virtual void close() {}
};

class StreamSink : public NotificationSink {
 public:
  explicit StreamSink(std::ostream& out) : out_(out) {}
  void write(const MatchNotification& n) override;
  void close() override;

 private:
  std::ostream& out_;
  std::mutex mu_;
};

class FileSink : public NotificationSink {
 public:
  explicit FileSink(const std::filesystem::path& path);
  void write(const MatchNotification& n) override { inner_.write(n); }
  void close() override;

 private:
  std::ofstream file_;
  StreamSink inner_{file_};
};

class CollectingSink : public NotificationSink {
 public:
  void write(const MatchNotification& n) override;
  std::vector<MatchNotification> take();

 private:
  std::mutex mu_;
  std::vector<MatchNotification> items_;
};

// ---------------------------------------------------------------------------
// Metrics

struct ProducerMetrics {
  std::atomic<std::uint64_t> lines{0};
  std::atomic<std::uint64_t> ingested{0};
  std::atomic<std::uint64_t> dropped_out_of_order{0};
  std::atomic<std::uint64_t> malformed{0};
  std::atomic<std::uint64_t> producer_mismatch{0};
  // Builder-thread only; read after the run.
  double parse_ms = 0;
  double build_ms = 0;
  double representation_ms = 0;
};

struct LatencySample {
  std::string query_id;
  std::string producer_id;
  std::int64_t window_start_ms = 0;
  std::int64_t window_end_ms = 0;
  std::size_t graph_count = 0;
  double queue_ms = 0;    // sealed until the matcher picks the state up
  double matcher_ms = 0;  // pick-up until every notification is written
  double representation_ms = 0;  // mean per graph in the window
  double system_ms = 0;
  std::size_t notifications = 0;
  std::uint64_t seq_combinations = 0;
  bool truncated = false;
};

struct QueryMetrics {
  std::atomic<std::uint64_t> windows{0};
  std::atomic<std::uint64_t> graphs{0};
  std::atomic<std::uint64_t> emitted{0};
  std::atomic<std::uint64_t> suppressed{0};
  std::atomic<std::uint64_t> truncated_windows{0};
  std::atomic<std::uint64_t> states_dropped{0};
  // Matcher-thread only; read after the run.
  std::vector<LatencySample> samples;
};

struct EngineMetrics {
  std::map<std::string, std::unique_ptr<ProducerMetrics>> producers;
  std::map<std::string, std::unique_ptr<QueryMetrics>> queries;
  std::uint64_t frames_processed = 0;
  double wall_seconds = 0;

  double throughput_fps() const {
    return wall_seconds > 0 ? static_cast<double>(frames_processed) / wall_seconds : 0.0;
  }
  std::vector<LatencySample> all_samples() const;
};

void write_metrics_json(std::ostream& out, const EngineMetrics& m);
void write_latency_csv(std::ostream& out, const std::vector<LatencySample>& samples);

// ---------------------------------------------------------------------------
// Configuration

struct ProducerSpec {
  std::string id;
  std::string source;  // path or host:port
};

struct QuerySpec {
  std::string id;
  std::string path;
};

struct EngineConfig {
  std::vector<ProducerSpec> producers;
  std::vector<QuerySpec> queries;
  std::string output = "-";
  TrackingParams tracking;
  std::size_t queue_capacity = 16;
  std::size_t producer_queue_capacity = 256;
  std::size_t combination_cap = kDefaultCombinationCap;
  std::string state_dump;   // optional debug file of sealed windows
  std::string metrics;      // optional JSON summary
  std::string latency_csv;  // optional per-window samples
};

/// INI file with [engine], [producers] (id = source) and [queries]
/// (id = path) sections. Relative paths resolve against the file's directory.
EngineConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Engine

struct EngineOptions {
  TrackingParams tracking;
  std::size_t queue_capacity = 16;
  std::size_t producer_queue_capacity = 256;
  std::size_t combination_cap = kDefaultCombinationCap;
  std::ostream* state_dump = nullptr;
  /// Polled by readers; set it (e.g. from a signal handler) to stop early.
  const std::atomic<bool>* stop = nullptr;
};

enum class RunStatus { Completed, Interrupted, Aborted };

struct RunResult {
  RunStatus status = RunStatus::Completed;
  std::string error;
};

class Engine {
 public:
  explicit Engine(EngineOptions opts = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void add_producer(std::string id, std::unique_ptr<LineSource> source);

  /// Parses and compiles; QueryError surfaces unchanged. Throws ConfigError
  /// for a duplicate id.
  const veql::QueryPlan& register_query(const std::string& id, std::string_view veql_text);

  /// Throws ConfigError when a query reads from an unknown producer.
  void validate() const;

  /// Runs every stream to its end (or until stopped) and drains all windows.
  /// Callable once.
  RunResult run(NotificationSink& sink);

  const EngineMetrics& metrics() const { return metrics_; }
  const std::map<std::string, veql::QueryPlan>& plans() const { return plans_; }

 private:
  struct Impl;
  EngineOptions opts_;
  std::vector<std::pair<std::string, std::unique_ptr<LineSource>>> producers_;
  std::map<std::string, veql::QueryPlan> plans_;
  std::vector<std::string> query_order_;
  EngineMetrics metrics_;
  bool ran_ = false;
};

}  // namespace cep
