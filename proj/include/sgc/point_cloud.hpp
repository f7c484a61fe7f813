#pragma once

#include "sgc/core.hpp"
#include "sgc/transform.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sgc {

/// A scan: ordered points, optional unit normals, opaque identifier.
/// Immutable by convention once handed to downstream operations.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or one unit vector per point
  std::string id;

  Index size() const { return static_cast<Index>(points.size()); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  const Vec3& point(Index i) const { return points[static_cast<std::size_t>(i)]; }
  const Vec3& normal(Index i) const { return normals[static_cast<std::size_t>(i)]; }

  /// Throws when the normal array is present but inconsistent.
  void validate() const;
};

/// Mean nearest-neighbor distance; the length unit for every descriptor
/// parameter and noise level in this library.
struct Resolution {
  double pr = 0.0;
};

class KdTree;

/// Mean over all points of the distance to their nearest other point.
/// Requires at least 2 points and a non-degenerate cloud (pr > 0).
Resolution compute_resolution(const PointCloud& cloud, const KdTree& tree);
Resolution compute_resolution(const PointCloud& cloud);

/// Rigidly moves points and rotates normals.
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& transform);

/// Axis-aligned bounds of the points. Cloud must be non-empty.
std::pair<Vec3, Vec3> bounding_box(std::span<const Vec3> points);

}  // namespace sgc
