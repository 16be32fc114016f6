#include "cep/temporal.hpp"

#include <algorithm>

namespace cep {

std::string to_string(TemporalOperator op) {
  switch (op) {
    case TemporalOperator::Seq: return "SEQ";
    case TemporalOperator::Eq: return "EQ";
    case TemporalOperator::Conj: return "CONJ";
    case TemporalOperator::Disj: return "DISJ";
  }
  return "?";
}

namespace {

bool occurs_before(const EventOccurrence& a, const EventOccurrence& b) {
  if (a.timestamp_ms != b.timestamp_ms) return a.timestamp_ms < b.timestamp_ms;
  return a.frame_index < b.frame_index;
}

const std::vector<EventOccurrence> kEmpty;

enum class Mode { Seq, Eq, Conj };

// Depth-first enumeration of tuples across key lists in lexicographic order.
class TupleEnumerator {
 public:
  TupleEnumerator(Mode mode, std::vector<std::span<const EventOccurrence>> lists,
                  TemporalOperator op, TemporalOptions opts, bool count_all)
      : mode_(mode), lists_(std::move(lists)), op_(op), opts_(opts), count_all_(count_all) {
    partial_.reserve(lists_.size());
  }

  TemporalResult run() {
    for (const auto& l : lists_)
      if (l.empty()) return {};
    descend(0);
    result_.truncated = found_ > opts_.cap;
    if (mode_ == Mode::Seq) result_.total = found_;
    return std::move(result_);
  }

 private:
  std::pair<std::size_t, std::size_t> range(std::size_t level) const {
    const auto& list = lists_[level];
    if (level == 0 || mode_ == Mode::Conj) return {0, list.size()};
    const std::int64_t prev = partial_.back()->timestamp_ms;
    auto by_ts = [](const EventOccurrence& o, std::int64_t t) { return o.timestamp_ms < t; };
    if (mode_ == Mode::Seq) {
      auto it = std::partition_point(list.begin(), list.end(),
                                     [&](const EventOccurrence& o) { return o.timestamp_ms <= prev; });
      return {static_cast<std::size_t>(it - list.begin()), list.size()};
    }
    auto lo = std::lower_bound(list.begin(), list.end(), prev, by_ts);
    auto hi = std::partition_point(lo, list.end(),
                                   [&](const EventOccurrence& o) { return o.timestamp_ms == prev; });
    return {static_cast<std::size_t>(lo - list.begin()), static_cast<std::size_t>(hi - list.begin())};
  }

  bool node_taken(const EventOccurrence& occ) const {
    if (!opts_.distinct_nodes) return false;
    const NodeId id = occ.node_id();
    return std::any_of(partial_.begin(), partial_.end(),
                       [&](const EventOccurrence* p) { return p->node_id() == id; });
  }

  bool done() const { return !count_all_ && found_ > opts_.cap; }

  void descend(std::size_t level) {
    if (level == lists_.size()) {
      ++found_;
      if (result_.matches.size() < opts_.cap) {
        TemporalMatch m{op_, {}};
        m.bound_events.reserve(partial_.size());
        for (const auto* p : partial_) m.bound_events.push_back(*p);
        result_.matches.push_back(std::move(m));
      }
      return;
    }
    const auto [lo, hi] = range(level);
    for (std::size_t i = lo; i < hi && !done(); ++i) {
      const EventOccurrence& occ = lists_[level][i];
      if (node_taken(occ)) continue;
      partial_.push_back(&occ);
      descend(level + 1);
      partial_.pop_back();
    }
  }

  Mode mode_;
  std::vector<std::span<const EventOccurrence>> lists_;
  TemporalOperator op_;
  TemporalOptions opts_;
  bool count_all_;
  std::vector<const EventOccurrence*> partial_;
  std::uint64_t found_ = 0;
  TemporalResult result_;
};

std::vector<std::span<const EventOccurrence>> gather(const EventMap& m,
                                                     std::span<const std::string> keys) {
  std::vector<std::span<const EventOccurrence>> lists;
  lists.reserve(keys.size());
  for (const auto& k : keys) lists.push_back(m.at(k));
  return lists;
}

}  // namespace

void EventMap::add(EventOccurrence occ) {
  auto& list = lists_[occ.key];
  auto pos = std::upper_bound(list.begin(), list.end(), occ, occurs_before);
  list.insert(pos, std::move(occ));
}

void EventMap::ensure_key(const std::string& key) { lists_.try_emplace(key); }

std::span<const EventOccurrence> EventMap::at(const std::string& key) const {
  auto it = lists_.find(key);
  return it == lists_.end() ? std::span<const EventOccurrence>(kEmpty) : it->second;
}

std::size_t EventMap::populated_keys() const {
  return static_cast<std::size_t>(std::count_if(
      lists_.begin(), lists_.end(), [](const auto& kv) { return !kv.second.empty(); }));
}

TemporalResult eval_seq(const EventMap& m, std::span<const std::string> key_order,
                        TemporalOptions opts) {
  if (key_order.empty()) return {};
  return TupleEnumerator(Mode::Seq, gather(m, key_order), TemporalOperator::Seq, opts,
                         /*count_all=*/true)
      .run();
}

TemporalResult eval_eq(const EventMap& m, std::span<const std::string> keys,
                       TemporalOptions opts) {
  if (keys.empty()) return {};
  return TupleEnumerator(Mode::Eq, gather(m, keys), TemporalOperator::Eq, opts, false).run();
}

TemporalResult eval_conj(const EventMap& m, std::span<const std::string> keys,
                         TemporalOptions opts) {
  if (keys.empty()) return {};
  return TupleEnumerator(Mode::Conj, gather(m, keys), TemporalOperator::Conj, opts, false)
      .run();
}

TemporalResult eval_disj(const EventMap& m, std::span<const std::string> keys,
                         TemporalOptions opts) {
  TemporalResult out;
  std::uint64_t found = 0;
  for (const auto& k : keys) {
    for (const auto& occ : m.at(k)) {
      ++found;
      if (out.matches.size() < opts.cap) out.matches.push_back({TemporalOperator::Disj, {occ}});
    }
  }
  out.truncated = found > opts.cap;
  return out;
}

TemporalResult eval_temporal(TemporalOperator op, const EventMap& m,
                             std::span<const std::string> keys, TemporalOptions opts) {
  switch (op) {
    case TemporalOperator::Seq: return eval_seq(m, keys, opts);
    case TemporalOperator::Eq: return eval_eq(m, keys, opts);
    case TemporalOperator::Conj: return eval_conj(m, keys, opts);
    case TemporalOperator::Disj: return eval_disj(m, keys, opts);
  }
  return {};
}

}  // namespace cep
