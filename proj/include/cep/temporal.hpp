#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cep/vekg.hpp"

namespace cep {

enum class TemporalOperator { Seq, Eq, Conj, Disj };

std::string to_string(TemporalOperator op);

/// One occurrence of a query key. `node` is non-owning and must outlive the
/// occurrence (the matcher points into the window state's graphs).
struct EventOccurrence {
  std::string key;
  const ObjectNode* node = nullptr;
  std::int64_t timestamp_ms = 0;
  std::int64_t frame_index = 0;

  NodeId node_id() const { return node ? node->id : 0; }
};

/// key -> occurrences sorted by (timestamp_ms, frame_index).
class EventMap {
 public:
  void add(EventOccurrence occ);
  /// Registers a key with no occurrences yet.
  void ensure_key(const std::string& key);

  std::span<const EventOccurrence> at(const std::string& key) const;
  bool contains(const std::string& key) const { return lists_.contains(key); }
  /// Number of keys that hold at least one occurrence.
  std::size_t populated_keys() const;
  std::size_t size() const { return lists_.size(); }

 private:
  std::map<std::string, std::vector<EventOccurrence>> lists_;
};

struct TemporalMatch {
  TemporalOperator op = TemporalOperator::Seq;
  std::vector<EventOccurrence> bound_events;
};

struct TemporalResult {
  std::vector<TemporalMatch> matches;
  /// Set iff the full match count exceeds the cap.
  bool truncated = false;
  /// SEQ only: total number of skip-till-any combinations, including the
  /// ones beyond the cap.
  std::uint64_t total = 0;
};

inline constexpr std::size_t kDefaultCombinationCap = 10'000;
inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Options shared by the operators. With `distinct_nodes`, one tuple never
/// binds the same node id to two keys.
struct TemporalOptions {
  std::size_t cap = kDefaultCombinationCap;
  bool distinct_nodes = false;
};

/// Skip-till-any sequence: every tuple with strictly increasing timestamps
/// in `key_order`. Enumerates every combination; materializes up to cap.
TemporalResult eval_seq(const EventMap& m, std::span<const std::string> key_order,
                        TemporalOptions opts = {});

/// Tuples whose timestamps are all equal.
TemporalResult eval_eq(const EventMap& m, std::span<const std::string> keys,
                       TemporalOptions opts = {.cap = kUnlimited});

/// Every tuple across keys regardless of order (cartesian product).
TemporalResult eval_conj(const EventMap& m, std::span<const std::string> keys,
                         TemporalOptions opts = {.cap = kUnlimited});

/// One match per occurrence of any key.
TemporalResult eval_disj(const EventMap& m, std::span<const std::string> keys,
                         TemporalOptions opts = {.cap = kUnlimited});

TemporalResult eval_temporal(TemporalOperator op, const EventMap& m,
                             std::span<const std::string> keys, TemporalOptions opts);

}  // namespace cep
