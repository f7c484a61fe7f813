#pragma once

#include "sgc/core.hpp"

#include <span>
#include <vector>

namespace sgc {

/// Static kd-tree over a point set. Query results match a brute-force linear
/// scan exactly: radius queries return every index with distance <= radius,
/// nearest queries order by (distance, index) so ties go to the lower index.
/// Immutable after construction; concurrent queries are safe.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points, int leaf_size = 16);

  Index size() const { return static_cast<Index>(points_.size()); }

  /// Indices with |p - center| <= radius, ascending by index. radius > 0.
  std::vector<Index> radius_query(const Vec3& center, double radius) const;

  /// The k closest indices sorted by (distance, index). 1 <= k <= size().
  std::vector<Index> nearest_query(const Vec3& query, Index k) const;

  /// Index of the closest point (k = 1 shortcut).
  Index nearest_one(const Vec3& query) const;

  /// Squared distance to the closest point.
  double nearest_distance_squared(const Vec3& query) const;

 private:
  struct Node {
    double split = 0.0;
    Index left = -1, right = -1;  // children; -1 for leaves
    int axis = -1;                // -1 marks a leaf
    Index begin = 0, end = 0;     // leaf range into order_
  };

  Index build(Index begin, Index end);

  std::vector<Vec3> points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  Index root_ = -1;
  int leaf_size_;
};

}  // namespace sgc
