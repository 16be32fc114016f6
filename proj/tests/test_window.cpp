#include <atomic>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "cep/veql.hpp"
#include "cep/window.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cep;
using namespace std::chrono_literals;

namespace {

GraphPtr graph_at(std::int64_t ts, std::int64_t frame = -1) {
  auto g = std::make_shared<VEKGGraph>();
  g->producer_id = "P";
  g->timestamp_ms = ts;
  g->frame_index = frame < 0 ? ts : frame;
  return g;
}

WindowConfig config(std::int64_t length, std::int64_t slide) {
  WindowConfig c;
  c.query_id = "q";
  c.producer_id = "P";
  c.length_ms = length;
  c.slide_ms = slide;
  return c;
}

std::vector<WindowState> feed(WindowAssigner& a, const std::vector<std::int64_t>& stamps) {
  std::vector<WindowState> out;
  for (std::size_t i = 0; i < stamps.size(); ++i)
    for (auto& s : a.accept(graph_at(stamps[i], static_cast<std::int64_t>(i))))
      out.push_back(std::move(s));
  for (auto& s : a.flush()) out.push_back(std::move(s));
  return out;
}

}  // namespace

TEST_CASE("config from a window spec") {
  auto t = WindowConfig::from_spec({10.0, std::nullopt}, "q", "P");
  CHECK(t.length_ms == 10000);
  CHECK(t.slide_ms == 10000);
  CHECK(t.tumbling());
  auto s = WindowConfig::from_spec({10.0, 5.0}, "q", "P");
  CHECK(s.slide_ms == 5000);
  CHECK_FALSE(s.tumbling());
}

TEST_CASE("tumbling window seals on the first frame at its end") {
  WindowAssigner a(config(10000, 10000));
  for (std::int64_t t = 0; t < 10000; t += 1000) CHECK(a.accept(graph_at(t)).empty());
  auto sealed = a.accept(graph_at(10000));
  REQUIRE(sealed.size() == 1);
  CHECK(sealed[0].window_start_ms == 0);
  CHECK(sealed[0].window_end_ms == 10000);
  CHECK(sealed[0].graphs.size() == 10);
  CHECK(sealed[0].graphs.back()->timestamp_ms == 9000);
  CHECK(a.open_windows() == 1);
}

TEST_CASE("a 10 s window over a 30 fps stream holds about 300 graphs") {
  WindowAssigner a(WindowConfig::from_spec({10.0, std::nullopt}, "q", "P"));
  std::vector<WindowState> sealed;
  for (int f = 0; f <= 600; ++f)
    for (auto& s : a.accept(graph_at(f * 1000 / 30, f))) sealed.push_back(std::move(s));
  REQUIRE(sealed.size() == 2);
  CHECK(sealed[0].graphs.size() == 300);
  CHECK(sealed[1].graphs.size() == 300);
}

TEST_CASE("sliding windows: a frame at 7000 ms lands in two windows") {
  WindowAssigner a(config(10000, 5000));
  a.accept(graph_at(0));
  a.accept(graph_at(7000));
  auto open = a.flush();
  REQUIRE(open.size() == 2);
  CHECK(open[0].window_start_ms == 0);
  CHECK(open[0].graphs.size() == 2);
  CHECK(open[1].window_start_ms == 5000);
  CHECK(open[1].window_end_ms == 15000);
  REQUIRE(open[1].graphs.size() == 1);
  CHECK(open[1].graphs[0]->timestamp_ms == 7000);
}

TEST_CASE("flush") {
  WindowAssigner empty(config(1000, 1000));
  CHECK(empty.flush().empty());

  WindowAssigner half(config(10000, 10000));
  half.accept(graph_at(100));
  half.accept(graph_at(4000));
  auto one = half.flush();
  REQUIRE(one.size() == 1);
  CHECK(one[0].graphs.size() == 2);
  CHECK(half.open_windows() == 0);
}

TEST_CASE("windows anchor at a multiple of the slide and empty windows never open") {
  WindowAssigner a(config(1000, 1000));
  auto states = feed(a, {2500, 2600, 7100});
  REQUIRE(states.size() == 2);
  CHECK(states[0].window_start_ms == 2000);
  CHECK(states[1].window_start_ms == 7000);
}

TEST_CASE("property: tumbling windows partition a 10,000-frame replay") {
  std::mt19937_64 rng(23);
  std::vector<std::int64_t> stamps;
  std::int64_t t = static_cast<std::int64_t>(rng() % 5000);
  for (int i = 0; i < 10000; ++i) {
    stamps.push_back(t);
    t += static_cast<std::int64_t>(rng() % 80);  // includes equal timestamps and gaps
  }
  WindowAssigner a(config(3000, 3000));
  auto states = feed(a, stamps);
  std::vector<int> seen(stamps.size(), 0);
  std::int64_t prev_end = INT64_MIN;
  for (const auto& s : states) {
    CHECK(s.window_start_ms >= prev_end);
    prev_end = s.window_end_ms;
    CHECK_FALSE(s.graphs.empty());
    for (std::size_t i = 0; i < s.graphs.size(); ++i) {
      const auto& g = s.graphs[i];
      CHECK(g->timestamp_ms >= s.window_start_ms);
      CHECK(g->timestamp_ms < s.window_end_ms);
      if (i) CHECK(s.graphs[i - 1]->timestamp_ms <= g->timestamp_ms);
      ++seen[static_cast<std::size_t>(g->frame_index)];
    }
  }
  for (int c : seen) REQUIRE(c == 1);
}

TEST_CASE("property: sliding windows match an interval-coverage oracle") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t slide = 1 + static_cast<std::int64_t>(rng() % 500);
    const std::int64_t length = slide * (1 + static_cast<std::int64_t>(rng() % 5)) +
                                static_cast<std::int64_t>(rng() % slide);
    std::vector<std::int64_t> stamps;
    std::int64_t t = static_cast<std::int64_t>(rng() % 3000);
    for (int i = 0; i < 300; ++i) {
      stamps.push_back(t);
      t += static_cast<std::int64_t>(rng() % 120);
    }
    WindowAssigner a(config(length, slide));
    auto states = feed(a, stamps);

    // Oracle: windows [k*slide, k*slide + length) from the anchor on, kept
    // only if they hold at least one stamp.
    std::map<std::int64_t, std::vector<std::int64_t>> expected;
    const std::int64_t anchor = (stamps.front() / slide) * slide;
    for (std::int64_t start = anchor; start <= stamps.back(); start += slide)
      for (std::size_t i = 0; i < stamps.size(); ++i)
        if (stamps[i] >= start && stamps[i] < start + length)
          expected[start].push_back(static_cast<std::int64_t>(i));

    std::map<std::int64_t, std::vector<std::int64_t>> got;
    for (const auto& s : states) {
      CHECK(s.window_end_ms - s.window_start_ms == length);
      auto& v = got[s.window_start_ms];
      for (const auto& g : s.graphs) v.push_back(g->frame_index);
    }
    REQUIRE(got == expected);
  }
}

TEST_CASE("dispatch: enqueue, block under backpressure, abort on close") {
  BoundedQueue<WindowState> q(1);
  WindowState s;
  s.query_id = "q";
  CHECK(dispatch_state(s, q) == DispatchOutcome::Enqueued);
  CHECK(q.size() == 1);

  std::atomic<bool> done{false};
  std::thread producer([&] {
    CHECK(dispatch_state(s, q) == DispatchOutcome::Enqueued);
    done = true;
  });
  std::this_thread::sleep_for(50ms);
  CHECK_FALSE(done.load());
  auto popped = q.pop();
  REQUIRE(popped);
  CHECK(popped->dispatched_at.time_since_epoch().count() > 0);
  producer.join();
  CHECK(done.load());

  std::thread blocked([&] { CHECK(dispatch_state(s, q) == DispatchOutcome::Aborted); });
  std::this_thread::sleep_for(20ms);
  q.close();
  blocked.join();
  CHECK(q.pop().has_value());  // the earlier item still drains
  CHECK_FALSE(q.pop().has_value());
}

TEST_CASE("two queries on one producer receive equal graph counts") {
  WindowAssigner q1(WindowConfig::from_spec({10.0, std::nullopt}, "Q1", "P"));
  WindowAssigner q4(WindowConfig::from_spec({10.0, std::nullopt}, "Q4", "P"));
  std::size_t n1 = 0, n4 = 0;
  for (int f = 0; f < 900; ++f) {
    auto g = graph_at(f * 33, f);
    for (const auto& s : q1.accept(g)) n1 += s.graphs.size();
    for (const auto& s : q4.accept(g)) n4 += s.graphs.size();
  }
  for (const auto& s : q1.flush()) n1 += s.graphs.size();
  for (const auto& s : q4.flush()) n4 += s.graphs.size();
  CHECK(n1 == 900);
  CHECK(n4 == 900);
}

TEST_CASE("state record") {
  WindowAssigner a(config(1000, 1000));
  a.accept(graph_at(10, 1));
  a.accept(graph_at(20, 2));
  auto s = a.flush();
  std::ostringstream os;
  write_state_record(os, s.at(0));
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["query_id"] == "q");
  CHECK(j["window"] == nlohmann::json::array({0, 1000}));
  CHECK(j["graph_count"] == 2);
}
