#include "cep/detection.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace cep {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& what) {
  throw IngestError(IngestError::Kind::Schema, field + ": " + what, 0, field);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + key, "missing required field");
  return *it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected number");
  double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(path, "expected finite number");
  return d;
}

std::int64_t as_non_negative_int(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) schema_error(path, "integer too large");
    return static_cast<std::int64_t>(u);
  }
  if (v.is_number_integer()) {
    auto i = v.get<std::int64_t>();
    if (i < 0) schema_error(path, "must be non-negative");
    return i;
  }
  schema_error(path, "expected integer");
}

DetectionRecord parse_detection(const json& d, const std::string& path) {
  if (!d.is_object()) schema_error(path, "expected object");
  DetectionRecord rec;

  const json& label = require(d, "label", path);
  if (!label.is_string()) schema_error(path + "label", "expected string");
  rec.label = label.get<std::string>();
  if (rec.label.empty()) schema_error(path + "label", "label must be non-empty");

  rec.confidence = as_number(require(d, "confidence", path), path + "confidence");
  if (!(rec.confidence > 0.0 && rec.confidence <= 1.0))
    schema_error(path + "confidence", "confidence out of range");

  const json& bbox = require(d, "bbox", path);
  if (!bbox.is_array() || bbox.size() != 4)
    schema_error(path + "bbox", "expected [x_min, y_min, width, height]");
  rec.bbox.x_min = as_number(bbox[0], path + "bbox");
  rec.bbox.y_min = as_number(bbox[1], path + "bbox");
  rec.bbox.width = as_number(bbox[2], path + "bbox");
  rec.bbox.height = as_number(bbox[3], path + "bbox");
  if (rec.bbox.x_min < 0 || rec.bbox.y_min < 0)
    schema_error(path + "bbox", "coordinates must be non-negative");
  if (!(rec.bbox.width > 0) || !(rec.bbox.height > 0))
    schema_error(path + "bbox", "width and height must be positive");

  if (auto it = d.find("attributes"); it != d.end() && !it->is_null()) {
    if (!it->is_object()) schema_error(path + "attributes", "expected object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) schema_error(path + "attributes." + k, "expected string");
      rec.attributes.emplace(k, v.get<std::string>());
    }
  }

  if (auto it = d.find("feature"); it != d.end() && !it->is_null()) {
    if (!it->is_array()) schema_error(path + "feature", "expected array");
    std::vector<double> feature;
    feature.reserve(it->size());
    for (const auto& x : *it) feature.push_back(as_number(x, path + "feature"));
    rec.feature = std::move(feature);
  }
  return rec;
}

}  // namespace

OutOfOrderError::OutOfOrderError(std::int64_t prev_index, std::int64_t curr_index,
                                 std::int64_t prev_ts, std::int64_t curr_ts)
    : IngestError(Kind::OutOfOrder,
                  [&] {
                    std::ostringstream os;
                    os << "out-of-order frame: previous frame_index=" << prev_index
                       << " timestamp_ms=" << prev_ts << ", current frame_index=" << curr_index
                       << " timestamp_ms=" << curr_ts;
                    return os.str();
                  }()),
      prev_index_(prev_index),
      curr_index_(curr_index) {}

FrameDetections parse_detection_line(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw IngestError(IngestError::Kind::Syntax,
                      "malformed record at byte " + std::to_string(e.byte) + ": " + e.what(),
                      e.byte);
  }
  if (!doc.is_object()) schema_error("record", "expected object");

  FrameDetections frame;
  const json& producer = require(doc, "producer_id", "");
  if (!producer.is_string()) schema_error("producer_id", "expected string");
  frame.producer_id = producer.get<std::string>();
  frame.frame_index = as_non_negative_int(require(doc, "frame_index", ""), "frame_index");
  frame.timestamp_ms = as_non_negative_int(require(doc, "timestamp_ms", ""), "timestamp_ms");

  const json& dets = require(doc, "detections", "");
  if (!dets.is_array()) schema_error("detections", "expected array");
  frame.detections.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i)
    frame.detections.push_back(
        parse_detection(dets[i], "detections[" + std::to_string(i) + "]."));
  return frame;
}

std::string serialize_detection_line(const FrameDetections& frame) {
  json doc;
  doc["producer_id"] = frame.producer_id;
  doc["frame_index"] = frame.frame_index;
  doc["timestamp_ms"] = frame.timestamp_ms;
  json dets = json::array();
  for (const auto& d : frame.detections) {
    json j;
    j["label"] = d.label;
    j["confidence"] = d.confidence;
    j["bbox"] = {d.bbox.x_min, d.bbox.y_min, d.bbox.width, d.bbox.height};
    if (!d.attributes.empty()) j["attributes"] = d.attributes;
    if (d.feature) j["feature"] = *d.feature;
    dets.push_back(std::move(j));
  }
  doc["detections"] = std::move(dets);
  return doc.dump();
}

const FrameDetections& validate_sequence(const FrameDetections& prev,
                                         const FrameDetections& curr) {
  if (curr.frame_index <= prev.frame_index || curr.timestamp_ms < prev.timestamp_ms)
    throw OutOfOrderError(prev.frame_index, curr.frame_index, prev.timestamp_ms,
                          curr.timestamp_ms);
  return curr;
}

bool SequenceGate::admit(const FrameDetections& frame) {
  if (last_) {
    try {
      validate_sequence(*last_, frame);
    } catch (const OutOfOrderError&) {
      ++dropped_;
      return false;
    }
  }
  // Only the ordering keys are needed for the next comparison.
  last_ = FrameDetections{frame.producer_id, frame.frame_index, frame.timestamp_ms, {}};
  return true;
}

}  // namespace cep
