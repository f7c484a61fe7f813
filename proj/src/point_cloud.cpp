#include "sgc/point_cloud.hpp"

#include "sgc/kd_tree.hpp"

namespace sgc {

void PointCloud::validate() const {
  if (!normals.empty()) {
    require(normals.size() == points.size(), "cloud '" + id + "': normal count mismatch");
    for (const Vec3& n : normals)
      require(std::abs(n.norm() - 1.0) <= 1e-6, "cloud '" + id + "': non-unit normal");
  }
}

Resolution compute_resolution(const PointCloud& cloud, const KdTree& tree) {
  require(cloud.size() >= 2, "compute_resolution: need at least 2 points");
  double sum = 0.0;
  for (Index i = 0; i < cloud.size(); ++i) {
    const auto nearest = tree.nearest_query(cloud.point(i), 2);
    // The query coincides with point i; skip the self hit.
    const Index other = (nearest[0] == i) ? nearest[1] : nearest[0];
    sum += (cloud.point(other) - cloud.point(i)).norm();
  }
  const double pr = sum / double(cloud.size());
  require(pr > 0.0, "compute_resolution: degenerate cloud (all points coincide)");
  return Resolution{pr};
}

Resolution compute_resolution(const PointCloud& cloud) {
  require(cloud.size() >= 2, "compute_resolution: need at least 2 points");
  return compute_resolution(cloud, KdTree(cloud.points));
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& transform) {
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.points.push_back(transform.apply(p));
  out.normals.reserve(cloud.normals.size());
  for (const Vec3& n : cloud.normals) out.normals.push_back(transform.rotation * n);
  return out;
}

std::pair<Vec3, Vec3> bounding_box(std::span<const Vec3> points) {
  require(!points.empty(), "bounding_box: empty point set");
  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

}  // namespace sgc
