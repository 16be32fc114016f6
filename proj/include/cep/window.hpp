#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cep/bounded_queue.hpp"
#include "cep/vekg.hpp"

namespace cep {

namespace veql {
struct WindowSpec;
}

using Clock = std::chrono::steady_clock;

struct WindowConfig {
  std::string query_id;
  std::string producer_id;
  std::int64_t length_ms = 10'000;
  std::int64_t slide_ms = 10'000;  // == length_ms for tumbling windows

  bool tumbling() const { return slide_ms == length_ms; }

  /// Seconds from the query's TIMEFRAME_WINDOW, rounded to milliseconds.
  static WindowConfig from_spec(const veql::WindowSpec& spec, std::string query_id,
                                std::string producer_id);
};

/// A sealed window: every graph with timestamp in [window_start_ms,
/// window_end_ms), in timestamp order. Graphs are shared read-only between
/// overlapping windows and between queries.
struct WindowState {
  std::string query_id;
  std::string producer_id;
  std::int64_t window_start_ms = 0;
  std::int64_t window_end_ms = 0;
  std::vector<GraphPtr> graphs;
  Clock::time_point sealed_at{};
  Clock::time_point dispatched_at{};
};

/// Event-time window assigner for one (producer, query) pair. Windows start
/// at multiples of the slide, beginning with the one that holds the first
/// graph; windows that would receive no graph are never opened.
class WindowAssigner {
 public:
  explicit WindowAssigner(WindowConfig config);

  /// Seals (and returns) every open window ending at or before g's
  /// timestamp, then appends g to every window covering it.
  std::vector<WindowState> accept(GraphPtr g);

  /// End of stream: seals all open windows as they are.
  std::vector<WindowState> flush();

  const WindowConfig& config() const { return config_; }
  std::size_t open_windows() const { return open_.size(); }

 private:
  WindowState seal(std::int64_t start, std::vector<GraphPtr> graphs) const;

  WindowConfig config_;
  std::optional<std::int64_t> anchor_;
  std::map<std::int64_t, std::vector<GraphPtr>> open_;
};

enum class DispatchOutcome { Enqueued, Aborted };

/// Hands a sealed state to a matcher queue, blocking while it is full.
/// Returns Aborted when the queue was closed (engine shutdown).
DispatchOutcome dispatch_state(WindowState s, BoundedQueue<WindowState>& queue);

/// Debug sink: one JSON line per sealed window (query, bounds, graph count).
void write_state_record(std::ostream& out, const WindowState& s);

}  // namespace cep
