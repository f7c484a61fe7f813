#include "sgc/lrf.hpp"

namespace sgc {

Support extract_support(const PointCloud& cloud, const KdTree& tree, const Vec3& p, double r) {
  require(r > 0.0, "extract_support: radius must be positive");
  Support support;
  support.center = p;
  support.radius = r;
  support.parent_id = cloud.id;
  support.point_indices = tree.radius_query(p, r);
  if (support.point_indices.empty()) fail("extract_support: empty support");
  return support;
}

LrfResult compute_lrf(const PointCloud& cloud, const Support& support,
                      const std::optional<Vec3>& normal, double tie_tolerance) {
  const auto& idx = support.point_indices;
  require(idx.size() >= 4, "compute_lrf: support smaller than 4 points");
  const Vec3 p = support.center;
  const double r = support.radius;

  Mat3 cov = Mat3::Zero();
  double weight_sum = 0.0;
  for (Index i : idx) {
    const Vec3 d = cloud.point(i) - p;
    const double w = r - d.norm();
    cov += w * (d * d.transpose());
    weight_sum += w;
  }
  require(weight_sum > 0.0, "compute_lrf: degenerate support weights");
  cov /= weight_sum;

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  require(solver.info() == Eigen::Success, "compute_lrf: eigendecomposition failed");
  const Vec3 evals = solver.eigenvalues();  // ascending
  const double lead = evals[2];
  require(lead > 0.0 && evals[1] > lead * 1e-12, "compute_lrf: support covariance rank < 2");

  LrfResult result;
  result.ambiguous = (lead - evals[1]) < tie_tolerance * lead ||
                     (evals[1] - evals[0]) < tie_tolerance * lead;

  Vec3 x_axis = solver.eigenvectors().col(2);
  Vec3 y_axis = solver.eigenvectors().col(1);
  // Each of the two leading axes points toward the weighted bulk of the
  // support. Counting sign majorities ties exactly on point-symmetric
  // supports (every regularly sampled patch), which makes the frame depend
  // on the arbitrary eigenvector sign; the distance-weighted projection sum
  // is the continuous form of the same majority and stays repeatable.
  for (Vec3* axis : {&x_axis, &y_axis}) {
    double weighted_sum = 0.0;
    Index positive = 0, negative = 0;
    for (Index i : idx) {
      const Vec3 d = cloud.point(i) - p;
      const double t = d.dot(*axis);
      weighted_sum += (r - d.norm()) * t;
      if (t > 0.0) ++positive;
      if (t < 0.0) ++negative;
    }
    bool flip;
    if (weighted_sum != 0.0)
      flip = weighted_sum < 0.0;
    else if (positive != negative)
      flip = positive < negative;
    else  // fully symmetric support: any fixed canonical sign
      flip = (*axis)[0] < 0.0 ||
             ((*axis)[0] == 0.0 && ((*axis)[1] < 0.0 || ((*axis)[1] == 0.0 && (*axis)[2] < 0.0)));
    if (flip) *axis = -*axis;
  }
  Vec3 z_axis = x_axis.cross(y_axis);
  if (normal && z_axis.dot(*normal) < 0.0) {
    z_axis = -z_axis;
    y_axis = -y_axis;  // keeps det(axes) = +1
  }

  result.lrf.origin = p;
  result.lrf.axes.row(0) = x_axis;
  result.lrf.axes.row(1) = y_axis;
  result.lrf.axes.row(2) = z_axis;
  return result;
}

}  // namespace sgc
