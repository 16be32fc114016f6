#include "cep/vekg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "cep/spatial.hpp"

namespace cep {

const ObjectNode* VEKGGraph::find(NodeId id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::optional<SpatialEdge> VEKGGraph::edge(NodeId subject, NodeId reference) const {
  if (subject == reference || !find(subject) || !find(reference)) return std::nullopt;
  if (auto it = spatial_edges.find({subject, reference}); it != spatial_edges.end())
    return it->second;
  return SpatialEdge{};
}

void VEKGGraph::set_edge(NodeId subject, NodeId reference, SpatialEdge e) {
  spatial_edges[{subject, reference}] = std::move(e);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max(), b.x_max()) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max(), b.y_max()) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || a.size() != b.size())
    throw SimilarityError("feature length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw SimilarityError("zero feature vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

std::optional<double> feature_similarity(const std::optional<std::vector<double>>& a,
                                         const std::optional<std::vector<double>>& b) {
  if (!a || !b) return std::nullopt;
  try {
    return cosine_similarity(*a, *b);
  } catch (const SimilarityError&) {
    return std::nullopt;
  }
}

struct Candidate {
  double iou;
  double cosine;  // -inf when unavailable
  NodeId prev_id;
  std::size_t curr_index;
};

}  // namespace

std::map<std::size_t, NodeId> track_objects(std::span<const ObjectNode> prev_nodes,
                                            std::span<const DetectionRecord> curr,
                                            const TrackingParams& params) {
  std::vector<Candidate> candidates;
  for (const auto& p : prev_nodes) {
    for (std::size_t c = 0; c < curr.size(); ++c) {
      if (p.label != curr[c].label) continue;
      const double overlap = iou(p.bbox, curr[c].bbox);
      const auto sim = feature_similarity(p.feature, curr[c].feature);
      if (overlap < params.iou_threshold && !(sim && *sim >= params.cosine_sim_threshold))
        continue;
      candidates.push_back(
          {overlap, sim.value_or(-std::numeric_limits<double>::infinity()), p.id, c});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.iou != y.iou) return x.iou > y.iou;
    if (x.cosine != y.cosine) return x.cosine > y.cosine;
    if (x.prev_id != y.prev_id) return x.prev_id < y.prev_id;
    return x.curr_index < y.curr_index;
  });

  std::map<std::size_t, NodeId> assignment;
  std::set<NodeId> used;
  for (const auto& cand : candidates) {
    if (assignment.contains(cand.curr_index) || used.contains(cand.prev_id)) continue;
    assignment.emplace(cand.curr_index, cand.prev_id);
    used.insert(cand.prev_id);
  }
  return assignment;
}

VEKGGraph build_vekg(const FrameDetections& frame, const VEKGGraph* prev,
                     const TrackingParams& params, IdSource& ids) {
  VEKGGraph g;
  g.producer_id = frame.producer_id;
  g.frame_index = frame.frame_index;
  g.timestamp_ms = frame.timestamp_ms;

  std::map<std::size_t, NodeId> assignment;
  if (prev) assignment = track_objects(prev->nodes, frame.detections, params);

  g.nodes.reserve(frame.detections.size());
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    const auto& d = frame.detections[i];
    ObjectNode n;
    if (auto it = assignment.find(i); it != assignment.end()) {
      n.id = it->second;
      g.temporal_edges.push_back({n.id, n.id});
    } else {
      n.id = ids.next();
    }
    n.label = d.label;
    n.confidence = d.confidence;
    n.attributes = d.attributes;
    n.bbox = d.bbox;
    n.feature = d.feature;
    n.frame_index = frame.frame_index;
    n.timestamp_ms = frame.timestamp_ms;
    g.nodes.push_back(std::move(n));
  }
  return g;
}

GraphPtr GraphBuilder::build(const FrameDetections& frame) {
  auto g = std::make_shared<VEKGGraph>(build_vekg(frame, prev_.get(), params_, ids_));
  prev_ = g;
  return g;
}

std::string dump_vekg(const VEKGGraph& g) {
  std::ostringstream os;
  os << "graph producer=" << g.producer_id << " frame=" << g.frame_index
     << " t=" << g.timestamp_ms << "ms nodes=" << g.nodes.size() << "\n";
  for (const auto& n : g.nodes) {
    os << "  node " << n.id << " " << n.label << " conf=" << n.confidence << " bbox=["
       << n.bbox.x_min << "," << n.bbox.y_min << "," << n.bbox.width << "," << n.bbox.height
       << "]";
    for (const auto& [k, v] : n.attributes) os << " " << k << "=" << v;
    os << "\n";
  }
  for (const auto& a : g.nodes) {
    for (const auto& b : g.nodes) {
      if (a.id == b.id) continue;
      auto dir = direction_relation(a, b);
      os << "  edge " << a.id << " -> " << b.id << " direction="
         << (dir ? to_string(*dir) : std::string("NONE")) << " topology={";
      bool first = true;
      for (auto rel : topology_relation(a.bbox, b.bbox)) {
        os << (first ? "" : ",") << to_string(rel);
        first = false;
      }
      os << "} distance=" << msf_distance(a, b);
      if (auto e = g.edge(a.id, b.id); e && !e->relation.empty())
        os << " weight[" << e->relation << "]=" << e->weight;
      os << "\n";
    }
  }
  for (const auto& t : g.temporal_edges)
    os << "  temporal " << t.node << " <- " << t.predecessor << " (previous frame)\n";
  return os.str();
}

}  // namespace cep
