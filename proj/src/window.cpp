#include "cep/window.hpp"

#include <cmath>

#include "cep/veql.hpp"
#include "json.hpp"

namespace cep {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

WindowConfig WindowConfig::from_spec(const veql::WindowSpec& spec, std::string query_id,
                                     std::string producer_id) {
  WindowConfig c;
  c.query_id = std::move(query_id);
  c.producer_id = std::move(producer_id);
  c.length_ms = std::max<std::int64_t>(1, std::llround(spec.length_s * 1000.0));
  c.slide_ms = spec.slide_s ? std::max<std::int64_t>(1, std::llround(*spec.slide_s * 1000.0))
                            : c.length_ms;
  if (c.slide_ms > c.length_ms) c.slide_ms = c.length_ms;
  return c;
}

WindowAssigner::WindowAssigner(WindowConfig config) : config_(std::move(config)) {}

WindowState WindowAssigner::seal(std::int64_t start, std::vector<GraphPtr> graphs) const {
  WindowState s;
  s.query_id = config_.query_id;
  s.producer_id = config_.producer_id;
  s.window_start_ms = start;
  s.window_end_ms = start + config_.length_ms;
  s.graphs = std::move(graphs);
  s.sealed_at = Clock::now();
  return s;
}

std::vector<WindowState> WindowAssigner::accept(GraphPtr g) {
  const std::int64_t t = g->timestamp_ms;
  const std::int64_t slide = config_.slide_ms;
  if (!anchor_) anchor_ = floor_div(t, slide) * slide;

  std::vector<WindowState> sealed;
  while (!open_.empty() && open_.begin()->first + config_.length_ms <= t) {
    auto node = open_.extract(open_.begin());
    sealed.push_back(seal(node.key(), std::move(node.mapped())));
  }

  // Covering starts: multiples of slide in (t - length, t], not before anchor.
  std::int64_t first = (floor_div(t - config_.length_ms, slide) + 1) * slide;
  if (first < *anchor_) first = *anchor_;
  for (std::int64_t s = first; s <= t; s += slide) open_[s].push_back(g);
  return sealed;
}

std::vector<WindowState> WindowAssigner::flush() {
  std::vector<WindowState> sealed;
  for (auto& [start, graphs] : open_) sealed.push_back(seal(start, std::move(graphs)));
  open_.clear();
  return sealed;
}

DispatchOutcome dispatch_state(WindowState s, BoundedQueue<WindowState>& queue) {
  s.dispatched_at = Clock::now();
  return queue.push(std::move(s)) ? DispatchOutcome::Enqueued : DispatchOutcome::Aborted;
}

void write_state_record(std::ostream& out, const WindowState& s) {
  nlohmann::json j;
  j["query_id"] = s.query_id;
  j["producer_id"] = s.producer_id;
  j["window"] = {s.window_start_ms, s.window_end_ms};
  j["graph_count"] = s.graphs.size();
  if (!s.graphs.empty())
    j["frames"] = {s.graphs.front()->frame_index, s.graphs.back()->frame_index};
  out << j.dump() << '\n';
}

}  // namespace cep
