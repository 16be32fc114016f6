#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cep {

/// Axis-aligned box in pixel coordinates. Origin is top-left, x grows
/// rightward and y grows downward.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double width = 0.0;
  double height = 0.0;

  double x_max() const { return x_min + width; }
  double y_max() const { return y_min + height; }
  double area() const { return width * height; }

  bool operator==(const BoundingBox&) const = default;
};

using AttributeMap = std::map<std::string, std::string>;

struct DetectionRecord {
  std::string label;
  double confidence = 0.0;
  BoundingBox bbox;
  AttributeMap attributes;
  std::optional<std::vector<double>> feature;

  bool operator==(const DetectionRecord&) const = default;
};

/// One frame of raw detections from a single producer.
struct FrameDetections {
  std::string producer_id;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::vector<DetectionRecord> detections;

  bool operator==(const FrameDetections&) const = default;
};

class IngestError : public std::runtime_error {
 public:
  enum class Kind { Syntax, Schema, OutOfOrder };

  IngestError(Kind kind, std::string message, std::size_t byte_offset = 0,
              std::string field = {})
      : std::runtime_error(std::move(message)),
        kind_(kind),
        byte_offset_(byte_offset),
        field_(std::move(field)) {}

  Kind kind() const { return kind_; }
  /// Offset of the offending byte for syntax errors.
  std::size_t byte_offset() const { return byte_offset_; }
  /// Name of the offending field for schema errors.
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::size_t byte_offset_;
  std::string field_;
};

class OutOfOrderError : public IngestError {
 public:
  OutOfOrderError(std::int64_t prev_index, std::int64_t curr_index,
                  std::int64_t prev_ts, std::int64_t curr_ts);

  std::int64_t prev_index() const { return prev_index_; }
  std::int64_t curr_index() const { return curr_index_; }

 private:
  std::int64_t prev_index_;
  std::int64_t curr_index_;
};

/// Parses one JSONL record of the detection wire format. Unknown fields are
/// ignored. Throws IngestError (Syntax or Schema).
FrameDetections parse_detection_line(std::string_view line);

/// Serializes to the canonical single-line wire form (no trailing newline).
std::string serialize_detection_line(const FrameDetections& frame);

/// Returns curr when it may follow prev in the same producer's stream,
/// otherwise throws OutOfOrderError.
const FrameDetections& validate_sequence(const FrameDetections& prev,
                                         const FrameDetections& curr);

/// Per-producer ordering gate: drops out-of-order frames and counts them.
class SequenceGate {
 public:
  /// Returns false (and counts a drop) when frame violates ordering.
  bool admit(const FrameDetections& frame);

  std::uint64_t dropped() const { return dropped_; }

 private:
  std::optional<FrameDetections> last_;
  std::uint64_t dropped_ = 0;
};

}  // namespace cep
