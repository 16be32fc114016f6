#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>

#include "cep/vekg.hpp"

namespace cep {

// Quadrant model around the reference object, in image coordinates:
// LEFT/RIGHT along -x/+x, FRONT/BACK along -y/+y (top of frame is front).
enum class DirectionRelation { Front, Back, Left, Right };

// DE-9im subset over closed axis-aligned boxes. Inside aliases Within;
// Crosses never holds for two areas.
enum class TopologyRelation {
  Disjoint,
  Touch,
  Contains,
  Intersect,
  Within,
  CoveredBy,
  Crosses,
  Overlap,
  Inside,
};

using SpatialRelation = std::variant<DirectionRelation, TopologyRelation>;
using TopologySet = std::set<TopologyRelation>;

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

std::string to_string(DirectionRelation r);
std::string to_string(TopologyRelation r);
std::string to_string(const SpatialRelation& r);

/// Case-insensitive lookup of a relation name ("Left", "COVEREDBY", ...).
std::optional<SpatialRelation> parse_spatial_relation(std::string_view name);

Point centroid(const BoundingBox& b);

/// Direction of `subject` as seen from `reference`; nullopt when the
/// centroids coincide. Ties on |dx| == |dy| go to the x axis.
std::optional<DirectionRelation> direction_relation(const BoundingBox& subject,
                                                    const BoundingBox& reference);
std::optional<DirectionRelation> direction_relation(const ObjectNode& subject,
                                                    const ObjectNode& reference);

/// Every topology predicate that holds for (a, b), read from a's side.
TopologySet topology_relation(const BoundingBox& a, const BoundingBox& b);

/// Boolean spatial function: 1 iff `relation` holds for subject with
/// `reference` as the frame of reference.
int bsf(const SpatialRelation& relation, const ObjectNode& subject, const ObjectNode& reference);

/// Euclidean distance between centroids, in pixels.
double msf_distance(const ObjectNode& a, const ObjectNode& b);

using NodePredicate = std::function<bool(const ObjectNode&)>;

std::size_t msf_count(const VEKGGraph& graph, const NodePredicate& predicate);

}  // namespace cep
