#pragma once

#include "sgc/kd_tree.hpp"
#include "sgc/point_cloud.hpp"

namespace sgc {

/// Uniform feature-point sampling by voxel-grid binning. The cell size is
/// searched so the occupied-cell count lands near `target`, then one point
/// per occupied cell is kept (the one nearest to the cell's point centroid,
/// ties to the lower index). At most `target` indices are returned; when the
/// grid yields more occupied cells, a seeded subset is kept. Pure function of
/// (cloud, target, seed).
std::vector<Index> uniform_sample(const PointCloud& cloud, const KdTree& tree, Index target,
                                  std::uint64_t seed);

/// Seeded draw of min(target, size) distinct indices.
std::vector<Index> random_sample(const PointCloud& cloud, Index target, std::uint64_t seed);

struct NormalEstimate {
  PointCloud cloud;            // input positions plus estimated unit normals
  std::vector<Index> flagged;  // points with fewer than 3 neighbors in radius
};

/// Normal per point from the smallest eigenvector of the neighborhood
/// covariance within `radius`, with signs made consistent by propagation
/// across a nearest-neighbor graph. Flagged points inherit the normal of the
/// nearest estimable point; when no point is estimable the result carries no
/// normals at all.
NormalEstimate estimate_normals(const PointCloud& cloud, const KdTree& tree, double radius);

}  // namespace sgc
