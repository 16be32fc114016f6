#pragma once

// Point-sampling oracle for topology relations between boxes whose corners
// are integers in [0, 8]. Sampling every half-integer point of
// [-0.5, 8.5]^2 is exact for such boxes: any closed contact contains an
// integer point and any interior overlap contains a half-integer point.

#include <bitset>
#include <vector>

#include "cep/spatial.hpp"

namespace oracle {

inline constexpr int kSide = 19;  // samples -0.5, 0, 0.5, ..., 8.5
using Mask = std::bitset<kSide * kSide>;

struct Raster {
  Mask closure;
  Mask interior;
};

inline double sample(int k) { return (k - 1) * 0.5; }

inline Raster rasterize(const cep::BoundingBox& b) {
  Raster r;
  for (int i = 0; i < kSide; ++i) {
    for (int j = 0; j < kSide; ++j) {
      const double x = sample(i), y = sample(j);
      const bool in_x = x >= b.x_min && x <= b.x_max();
      const bool in_y = y >= b.y_min && y <= b.y_max();
      const bool strict_x = x > b.x_min && x < b.x_max();
      const bool strict_y = y > b.y_min && y < b.y_max();
      r.closure[i * kSide + j] = in_x && in_y;
      r.interior[i * kSide + j] = strict_x && strict_y;
    }
  }
  return r;
}

/// Relation set derived from point-set membership only.
inline cep::TopologySet classify(const Raster& a, const Raster& b) {
  using cep::TopologyRelation;
  cep::TopologySet out;
  const bool meet = (a.closure & b.closure).any();
  const bool interiors_meet = (a.interior & b.interior).any();
  const bool a_in_b = (a.closure & ~b.closure).none();
  const bool b_in_a = (b.closure & ~a.closure).none();
  const bool a_in_b_interior = (a.closure & ~b.interior).none();
  const bool b_in_a_interior = (b.closure & ~a.interior).none();
  if (!meet) {
    out.insert(TopologyRelation::Disjoint);
    return out;
  }
  out.insert(TopologyRelation::Intersect);
  if (!interiors_meet) out.insert(TopologyRelation::Touch);
  if (interiors_meet && a_in_b) out.insert(TopologyRelation::CoveredBy);
  if (a_in_b_interior) {
    out.insert(TopologyRelation::Within);
    out.insert(TopologyRelation::Inside);
  }
  if (b_in_a_interior) out.insert(TopologyRelation::Contains);
  if (interiors_meet && !a_in_b && !b_in_a) out.insert(TopologyRelation::Overlap);
  return out;
}

/// Every box with integer corners inside [0, 8]^2 and positive area.
inline std::vector<cep::BoundingBox> all_integer_boxes() {
  std::vector<cep::BoundingBox> boxes;
  for (int x0 = 0; x0 <= 8; ++x0)
    for (int x1 = x0 + 1; x1 <= 8; ++x1)
      for (int y0 = 0; y0 <= 8; ++y0)
        for (int y1 = y0 + 1; y1 <= 8; ++y1)
          boxes.push_back({double(x0), double(y0), double(x1 - x0), double(y1 - y0)});
  return boxes;
}

}  // namespace oracle
