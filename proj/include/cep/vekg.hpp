#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cep/detection.hpp"

namespace cep {

using NodeId = std::int64_t;

/// A tracked object in one frame. The label is the node's class assignment.
struct ObjectNode {
  NodeId id = 0;
  std::string label;
  double confidence = 0.0;
  AttributeMap attributes;
  BoundingBox bbox;
  std::optional<std::vector<double>> feature;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;

  bool operator==(const ObjectNode&) const = default;
};

/// Relation label plus weight. The weight stays 0 until a query evaluates
/// the relation; 0/1 for boolean relations, >= 0 for metric ones.
struct SpatialEdge {
  std::string relation;
  double weight = 0.0;

  bool operator==(const SpatialEdge&) const = default;
};

/// Links a node to the node with the same id in the preceding graph.
struct TemporalEdge {
  NodeId node = 0;
  NodeId predecessor = 0;

  bool operator==(const TemporalEdge&) const = default;
};

using NodePair = std::pair<NodeId, NodeId>;

/// Per-frame knowledge graph. Implicitly a complete digraph over `nodes`;
/// `spatial_edges` only holds edges that have been evaluated.
struct VEKGGraph {
  std::string producer_id;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::vector<ObjectNode> nodes;
  std::map<NodePair, SpatialEdge> spatial_edges;
  std::vector<TemporalEdge> temporal_edges;
  /// Parse plus build time in ms when the engine measured it.
  double representation_ms = 0.0;

  const ObjectNode* find(NodeId id) const;

  /// Resolves the (subject, reference) edge for any ordered pair of distinct
  /// nodes in this graph; unevaluated edges come back with weight 0.
  std::optional<SpatialEdge> edge(NodeId subject, NodeId reference) const;
  void set_edge(NodeId subject, NodeId reference, SpatialEdge e);

  /// Number of ordered node pairs, n * (n - 1).
  std::size_t ordered_pair_count() const { return nodes.size() * (nodes.size() ? nodes.size() - 1 : 0); }
};

using GraphPtr = std::shared_ptr<const VEKGGraph>;

struct VEKGStream {
  std::string producer_id;
  std::vector<GraphPtr> graphs;
};

struct TrackingParams {
  double iou_threshold = 0.3;
  double cosine_sim_threshold = 0.7;
};

/// Monotonic id counter; one per producer, ids never recycle.
class IdSource {
 public:
  explicit IdSource(NodeId first = 1) : next_(first) {}
  NodeId next() { return next_++; }
  NodeId peek() const { return next_; }

 private:
  NodeId next_;
};

double iou(const BoundingBox& a, const BoundingBox& b);

class SimilarityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws SimilarityError on a length mismatch, empty input or a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Greedy one-to-one association of current detections to previous nodes.
/// Result maps current-detection index to the inherited node id.
std::map<std::size_t, NodeId> track_objects(std::span<const ObjectNode> prev_nodes,
                                            std::span<const DetectionRecord> curr,
                                            const TrackingParams& params);

VEKGGraph build_vekg(const FrameDetections& frame, const VEKGGraph* prev,
                     const TrackingParams& params, IdSource& ids);

/// Sequential graph construction for one producer.
class GraphBuilder {
 public:
  explicit GraphBuilder(TrackingParams params = {}) : params_(params) {}

  GraphPtr build(const FrameDetections& frame);

  const TrackingParams& params() const { return params_; }

 private:
  TrackingParams params_;
  IdSource ids_;
  GraphPtr prev_;
};

/// Human-readable adjacency listing (nodes, every ordered pair's direction
/// and topology relations, temporal edges).
std::string dump_vekg(const VEKGGraph& g);

}  // namespace cep
