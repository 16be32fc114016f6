#include "cep/spatial.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

namespace cep {

namespace {

constexpr std::array<std::pair<DirectionRelation, std::string_view>, 4> kDirectionNames{{
    {DirectionRelation::Front, "FRONT"},
    {DirectionRelation::Back, "BACK"},
    {DirectionRelation::Left, "LEFT"},
    {DirectionRelation::Right, "RIGHT"},
}};

constexpr std::array<std::pair<TopologyRelation, std::string_view>, 9> kTopologyNames{{
    {TopologyRelation::Disjoint, "DISJOINT"},
    {TopologyRelation::Touch, "TOUCH"},
    {TopologyRelation::Contains, "CONTAINS"},
    {TopologyRelation::Intersect, "INTERSECT"},
    {TopologyRelation::Within, "WITHIN"},
    {TopologyRelation::CoveredBy, "COVEREDBY"},
    {TopologyRelation::Crosses, "CROSSES"},
    {TopologyRelation::Overlap, "OVERLAP"},
    {TopologyRelation::Inside, "INSIDE"},
}};

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

// Closed-interval containment of a in b on both axes.
bool covered(const BoundingBox& a, const BoundingBox& b) {
  return b.x_min <= a.x_min && a.x_max() <= b.x_max() && b.y_min <= a.y_min &&
         a.y_max() <= b.y_max();
}

// a lies in the open interior of b.
bool strictly_inside(const BoundingBox& a, const BoundingBox& b) {
  return b.x_min < a.x_min && a.x_max() < b.x_max() && b.y_min < a.y_min &&
         a.y_max() < b.y_max();
}

}  // namespace

std::string to_string(DirectionRelation r) {
  for (const auto& [rel, name] : kDirectionNames)
    if (rel == r) return std::string(name);
  return "?";
}

std::string to_string(TopologyRelation r) {
  for (const auto& [rel, name] : kTopologyNames)
    if (rel == r) return std::string(name);
  return "?";
}

std::string to_string(const SpatialRelation& r) {
  return std::visit([](auto v) { return to_string(v); }, r);
}

std::optional<SpatialRelation> parse_spatial_relation(std::string_view name) {
  const std::string key = upper(name);
  for (const auto& [rel, n] : kDirectionNames)
    if (n == key) return SpatialRelation{rel};
  for (const auto& [rel, n] : kTopologyNames)
    if (n == key) return SpatialRelation{rel};
  return std::nullopt;
}

Point centroid(const BoundingBox& b) {
  return {b.x_min + b.width / 2.0, b.y_min + b.height / 2.0};
}

std::optional<DirectionRelation> direction_relation(const BoundingBox& subject,
                                                    const BoundingBox& reference) {
  const Point s = centroid(subject);
  const Point r = centroid(reference);
  const double dx = s.x - r.x;
  const double dy = s.y - r.y;
  if (dx == 0.0 && dy == 0.0) return std::nullopt;
  if (std::abs(dx) >= std::abs(dy))
    return dx < 0 ? DirectionRelation::Left : DirectionRelation::Right;
  return dy < 0 ? DirectionRelation::Front : DirectionRelation::Back;
}

std::optional<DirectionRelation> direction_relation(const ObjectNode& subject,
                                                    const ObjectNode& reference) {
  return direction_relation(subject.bbox, reference.bbox);
}

TopologySet topology_relation(const BoundingBox& a, const BoundingBox& b) {
  const bool closed_meet = a.x_min <= b.x_max() && b.x_min <= a.x_max() &&
                           a.y_min <= b.y_max() && b.y_min <= a.y_max();
  if (!closed_meet) return {TopologyRelation::Disjoint};

  TopologySet out{TopologyRelation::Intersect};
  const bool interiors_meet = a.x_min < b.x_max() && b.x_min < a.x_max() &&
                              a.y_min < b.y_max() && b.y_min < a.y_max();
  if (!interiors_meet) {
    out.insert(TopologyRelation::Touch);
    return out;
  }
  const bool a_covered = covered(a, b);
  const bool b_covered = covered(b, a);
  if (a_covered) out.insert(TopologyRelation::CoveredBy);
  if (strictly_inside(a, b)) {
    out.insert(TopologyRelation::Within);
    out.insert(TopologyRelation::Inside);
  }
  if (strictly_inside(b, a)) out.insert(TopologyRelation::Contains);
  if (!a_covered && !b_covered) out.insert(TopologyRelation::Overlap);
  return out;
}

int bsf(const SpatialRelation& relation, const ObjectNode& subject, const ObjectNode& reference) {
  if (const auto* dir = std::get_if<DirectionRelation>(&relation)) {
    auto actual = direction_relation(subject, reference);
    return actual && *actual == *dir ? 1 : 0;
  }
  const auto topo = std::get<TopologyRelation>(relation);
  return topology_relation(subject.bbox, reference.bbox).contains(topo) ? 1 : 0;
}

double msf_distance(const ObjectNode& a, const ObjectNode& b) {
  const Point p = centroid(a.bbox);
  const Point q = centroid(b.bbox);
  return std::hypot(p.x - q.x, p.y - q.y);
}

std::size_t msf_count(const VEKGGraph& graph, const NodePredicate& predicate) {
  return static_cast<std::size_t>(
      std::count_if(graph.nodes.begin(), graph.nodes.end(), predicate));
}

}  // namespace cep
