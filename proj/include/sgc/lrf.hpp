#pragma once

#include "sgc/kd_tree.hpp"
#include "sgc/point_cloud.hpp"

#include <optional>

namespace sgc {

/// Points of a cloud within radius `r` of a feature point.
struct Support {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  std::vector<Index> point_indices;
  std::string parent_id;
};

/// Orthonormal right-handed frame attached to a feature point. `axes` rows
/// are the x, y, z directions, so axes * (q - origin) yields local
/// coordinates and axes is the world-to-local rotation.
struct Lrf {
  Vec3 origin = Vec3::Zero();
  Mat3 axes = Mat3::Identity();

  Vec3 to_local(const Vec3& q) const { return axes * (q - origin); }
  Vec3 to_world(const Vec3& u) const { return axes.transpose() * u + origin; }

  /// Orthonormality and right-handedness within tol.
  bool is_valid(double tol = 1e-9) const {
    return (axes * axes.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(axes.determinant() - 1.0) <= tol;
  }
};

struct LrfResult {
  Lrf lrf;
  /// Set when the two leading covariance eigenvalues (or the trailing pair)
  /// are equal within the relative tie tolerance; such frames are not
  /// repeatable and callers skip the feature point.
  bool ambiguous = false;
};

/// The cloud points within distance r of p. Errors when no point is in range.
Support extract_support(const PointCloud& cloud, const KdTree& tree, const Vec3& p, double r);

/// Unique repeatable frame from distance-weighted PCA over the support.
///
/// Covariance: sum_i w_i (q_i - p)(q_i - p)^T / sum w_i with w_i = r - |q_i - p|.
/// Axes are its eigenvectors by decreasing eigenvalue; the first two axes are
/// each flipped to agree with the majority of (q_i - p) scalar products, the
/// third is their cross product. A supplied normal flips the third axis (and
/// the second, to keep the frame right-handed) when they disagree.
///
/// Errors on supports smaller than 4 points or covariance rank < 2; near-equal
/// eigenvalues (relative gap < tie_tolerance) flag the result ambiguous.
LrfResult compute_lrf(const PointCloud& cloud, const Support& support,
                      const std::optional<Vec3>& normal = std::nullopt,
                      double tie_tolerance = 1e-6);

}  // namespace sgc
