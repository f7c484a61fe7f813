#pragma once

#include "sgc/kd_tree.hpp"
#include "sgc/point_cloud.hpp"

#include <optional>

namespace sgc {

/// Boundary classification of every cloud point by the angular-gap
/// criterion: a point is boundary when its neighbors within 4 pr, projected
/// onto the local tangent plane, leave an angular gap above 120 degrees.
/// Points with fewer than 3 neighbors in that radius cannot form a closed
/// fan and are classified boundary.
struct BoundaryInfo {
  std::vector<char> is_boundary;
  std::vector<Index> boundary_points;
  double pr = 0.0;
};

BoundaryInfo detect_boundary(const PointCloud& cloud, const KdTree& tree,
                             std::optional<double> pr = std::nullopt, int threads = 0);

/// Euclidean distance from `point` to the nearest boundary point, infinity
/// when the cloud has no boundary (closed surface) or the nearest boundary
/// lies beyond probe_radius. Errors on clouds of fewer than 4 points.
double boundary_distance(const PointCloud& cloud, const BoundaryInfo& info, const Vec3& point,
                         double probe_radius);
double boundary_distance(const PointCloud& cloud, const KdTree& tree, const Vec3& point,
                         double probe_radius);

}  // namespace sgc
