#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cep/detection.hpp"
#include "cep/engine.hpp"

namespace cep::bench {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NoiseModel {
  double dropout = 0.0;            // probability a detection is missed
  double confidence_jitter = 0.0;  // uniform +-j, clamped to [0, 1]
  double bbox_jitter = 0.0;        // uniform +-k px on x and y
};

/// Objects that fill every frame but are not part of any scripted pattern.
struct BackgroundSpec {
  int min_objects = 0;
  int max_objects = 0;
  std::map<std::string, double> labels{{"Bus", 1.0}};
  double min_speed = 1.0;  // px/frame
  double max_speed = 4.0;
};

/// A group of identical actors alive over [start_s, end_s).
struct ActorScript {
  double start_s = 0;
  double end_s = 0;
  std::string label;
  std::string color;  // empty: no colour attribute
  int count = 1;
  double x = 40;
  double y = 300;
  double vx = 2;  // px/frame
  double vy = 0;
  double width = 80;
  double height = 60;
  double spacing = 160;  // distance between neighbours in a row
  std::optional<double> confidence;  // fixed; otherwise drawn per frame
};

struct SyntheticStreamSpec {
  int producers = 1;
  double fps = 30;
  double duration_s = 10;
  double width = 1280;
  double height = 720;
  BackgroundSpec background;
  std::vector<ActorScript> script;
  /// Tiles the script every `repeat_s` seconds when set.
  std::optional<double> repeat_s;
  NoiseModel noise;
  std::vector<std::pair<std::string, std::string>> queries;  // id, VEQL text
  std::vector<int> producer_sweep;
};

SyntheticStreamSpec parse_spec(std::string_view json_text);
SyntheticStreamSpec load_spec(const std::filesystem::path& path);

/// "Camera" for a single producer, else "Camera1", "Camera2", ...
std::string producer_name(int index, int producers);

/// A detection together with the identity of the actor that produced it.
struct TruthDetection {
  std::int64_t actor = 0;
  DetectionRecord record;
};

struct TruthFrame {
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::vector<TruthDetection> detections;
};

struct GeneratedProducer {
  std::string producer_id;
  std::vector<TruthFrame> clean;
  std::vector<std::string> lines;  // wire format after noise
};

struct GeneratedStream {
  std::vector<GeneratedProducer> producers;
};

/// Deterministic in (spec, seed). Noise draws use one random stream per
/// actor, so raising a noise knob only ever drops a superset of detections.
GeneratedStream generate_stream(const SyntheticStreamSpec& spec, std::uint64_t seed);

struct GroundTruthEvent {
  std::string query_id;
  std::string producer_id;
  std::int64_t window_start_ms = 0;
  std::int64_t window_end_ms = 0;
  bool expected = false;
};

/// Query ids are suffixed with "@producer" when there is more than one.
std::vector<std::pair<std::string, std::string>> expand_queries(const SyntheticStreamSpec& spec);

/// Evaluates every expanded query on the clean scene using true actor
/// identities, one event per window.
std::vector<GroundTruthEvent> ground_truth(const SyntheticStreamSpec& spec,
                                           const GeneratedStream& stream);

struct Score {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0, recall = 0, f = 0;
  /// Mean over windows where truth or prediction is positive of that
  /// window's own F (1 for a hit, 0 otherwise).
  double f_per_window = 0;
};

double f_score(double precision, double recall);

/// Scores per query id, plus an "all" entry pooling every query.
std::map<std::string, Score> score(const std::vector<MatchNotification>& notifications,
                                   const std::vector<GroundTruthEvent>& truth);

struct LatencySummary {
  std::size_t samples = 0;
  double mean = 0, p50 = 0, p99 = 0;
};

LatencySummary summarize(std::vector<double> values);

/// Mean representation time over the window's frames plus matcher latency.
double system_latency(double mean_representation_ms, double matcher_ms);

double throughput_fps(std::uint64_t frames, double wall_seconds);

struct RunOutput {
  std::vector<MatchNotification> notifications;
  std::uint64_t frames = 0;
  double wall_seconds = 0;
  std::vector<LatencySample> samples;
  std::map<std::string, std::uint64_t> suppressed;
};

/// Replays the generated lines through a full engine run.
RunOutput run_engine(const SyntheticStreamSpec& spec, const GeneratedStream& stream,
                     EngineOptions opts = {});

struct SweepPoint {
  int producers = 0;
  std::uint64_t frames = 0;
  double wall_seconds = 0;
  double fps = 0;
};

std::vector<SweepPoint> throughput_sweep(const SyntheticStreamSpec& spec, std::uint64_t seed);

struct BenchReport {
  std::map<std::string, Score> scores;
  std::map<std::string, LatencySummary> matcher_latency;
  std::map<std::string, LatencySummary> system_latency;
  double throughput = 0;
  std::vector<SweepPoint> sweep;
};

/// Generates, runs and scores; writes stream.jsonl, ground_truth.csv,
/// notifications.jsonl, metrics.csv and latency_samples.csv into out_dir.
BenchReport run_bench(const SyntheticStreamSpec& spec, std::uint64_t seed,
                      const std::filesystem::path& out_dir);

}  // namespace cep::bench
