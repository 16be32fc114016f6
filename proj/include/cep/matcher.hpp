#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cep/temporal.hpp"
#include "cep/veql.hpp"
#include "cep/window.hpp"

namespace cep {

/// A VEKG node that satisfied a query node. `node` points into the window
/// state's graphs; `probability` is the detector confidence P(E).
struct ObjectEvent {
  std::string key;
  const ObjectNode* node = nullptr;
  double probability = 0.0;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
};

struct FrameEvents {
  const VEKGGraph* graph = nullptr;
  std::vector<ObjectEvent> events;  // plan key order, then node order
};

struct ObjectEvents {
  std::vector<FrameEvents> frames;

  std::size_t total() const;
};

struct SpatialMatch {
  std::int64_t frame_index = 0;
  ObjectEvent subject;
  ObjectEvent reference;
};

struct CountMatch {
  std::int64_t frame_index = 0;  // representative frame
  std::size_t count = 0;
  std::vector<ObjectEvent> events;
};

/// Owning copy of a bound event, as carried by a notification.
struct BoundEvent {
  std::string key;
  NodeId node_id = 0;
  std::string label;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  double probability = 0.0;

  bool operator==(const BoundEvent&) const = default;
};

struct MatchNotification {
  std::string query_id;
  std::string producer_id;
  std::int64_t window_start_ms = 0;
  std::int64_t window_end_ms = 0;
  veql::PatternKind pattern_kind = veql::PatternKind::Object;
  std::vector<BoundEvent> bound_events;
  double confidence = 0.0;
  bool truncated = false;
  Clock::time_point emitted_at{};
};

/// Field-wise equality on everything serialized (emitted_at excluded).
bool same_content(const MatchNotification& a, const MatchNotification& b);

std::string to_json_line(const MatchNotification& n);
MatchNotification parse_notification_line(std::string_view line);

inline constexpr double kProbabilityClamp = 1e-6;

/// Entropy-weighted mean of event probabilities:
///   sum P * -log2(P) / sum -log2(P)
/// with each P clamped to [1e-6, 1 - 1e-6]. Requires a non-empty input.
double confidence_score(std::span<const double> probabilities);
double confidence_score(std::span<const BoundEvent> events);

ObjectEvents match_objects(const WindowState& state, const veql::QueryPlan& plan);

/// Spatial edge weights computed while matching, keyed by frame index. This
/// is the matcher's private view; the shared graphs are never written.
using EdgeOverlay = std::map<std::int64_t, std::map<NodePair, SpatialEdge>>;

std::vector<SpatialMatch> match_spatial(const ObjectEvents& events, const veql::QueryPlan& plan,
                                        EdgeOverlay* overlay = nullptr);

TemporalResult match_temporal(const ObjectEvents& events, const veql::QueryPlan& plan,
                              std::size_t cap = kDefaultCombinationCap);

std::optional<CountMatch> match_count(const WindowState& state, const veql::QueryPlan& plan);

struct MatcherOptions {
  std::size_t combination_cap = kDefaultCombinationCap;
};

struct WindowResult {
  std::vector<MatchNotification> notifications;
  std::size_t suppressed = 0;  // matches below the confidence threshold
  bool truncated = false;
  std::uint64_t seq_combinations = 0;
  EdgeOverlay edges;
};

WindowResult evaluate_window(const WindowState& state, const veql::QueryPlan& plan,
                             const MatcherOptions& opts = {});

}  // namespace cep
