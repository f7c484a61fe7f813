#include "sgc/boundary.hpp"

#include <algorithm>

namespace sgc {

BoundaryInfo detect_boundary(const PointCloud& cloud, const KdTree& tree,
                             std::optional<double> pr_opt, int threads) {
  require(cloud.size() >= 4, "detect_boundary: cloud too small");
  BoundaryInfo info;
  info.pr = pr_opt ? *pr_opt : compute_resolution(cloud, tree).pr;
  const double radius = 4.0 * info.pr;
  const double max_gap = 120.0 * M_PI / 180.0;
  info.is_boundary.assign(std::size_t(cloud.size()), 0);

  parallel_for(
      cloud.size(),
      [&](Index i) {
        const Vec3& p = cloud.point(i);
        const auto nbrs = tree.radius_query(p, radius);
        std::vector<Vec3> offsets;
        offsets.reserve(nbrs.size());
        for (Index j : nbrs)
          if (j != i) offsets.push_back(cloud.point(j) - p);
        if (offsets.size() < 3) {  // cannot close an angular fan
          info.is_boundary[std::size_t(i)] = 1;
          return;
        }
        Mat3 cov = Mat3::Zero();
        for (const Vec3& d : offsets) cov += d * d.transpose();
        Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
        const Vec3 e1 = solver.eigenvectors().col(2);
        const Vec3 e2 = solver.eigenvectors().col(1);
        std::vector<double> angles;
        angles.reserve(offsets.size());
        for (const Vec3& d : offsets) angles.push_back(std::atan2(d.dot(e2), d.dot(e1)));
        std::sort(angles.begin(), angles.end());
        double gap = 2.0 * M_PI - (angles.back() - angles.front());
        for (std::size_t a = 1; a < angles.size(); ++a)
          gap = std::max(gap, angles[a] - angles[a - 1]);
        if (gap > max_gap) info.is_boundary[std::size_t(i)] = 1;
      },
      threads);

  for (Index i = 0; i < cloud.size(); ++i)
    if (info.is_boundary[std::size_t(i)]) info.boundary_points.push_back(i);
  return info;
}

double boundary_distance(const PointCloud& cloud, const BoundaryInfo& info, const Vec3& point,
                         double probe_radius) {
  require(probe_radius > 0.0, "boundary_distance: probe radius must be positive");
  if (info.boundary_points.empty()) return kInfinity;
  double best2 = kInfinity;
  for (Index i : info.boundary_points)
    best2 = std::min(best2, (cloud.point(i) - point).squaredNorm());
  const double d = std::sqrt(best2);
  return d <= probe_radius ? d : kInfinity;
}

double boundary_distance(const PointCloud& cloud, const KdTree& tree, const Vec3& point,
                         double probe_radius) {
  return boundary_distance(cloud, detect_boundary(cloud, tree), point, probe_radius);
}

}  // namespace sgc
