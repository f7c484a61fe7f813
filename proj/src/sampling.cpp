#include "sgc/sampling.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>
#include <unordered_set>

namespace sgc {

namespace {

std::uint64_t cell_key(const Vec3& p, const Vec3& origin, double cell) {
  const auto ix = std::uint64_t(std::int64_t(std::floor((p.x() - origin.x()) / cell)));
  const auto iy = std::uint64_t(std::int64_t(std::floor((p.y() - origin.y()) / cell)));
  const auto iz = std::uint64_t(std::int64_t(std::floor((p.z() - origin.z()) / cell)));
  // 21 bits per axis; grids here are far smaller.
  return (ix & 0x1fffffULL) | ((iy & 0x1fffffULL) << 21) | ((iz & 0x1fffffULL) << 42);
}

Index count_occupied(const PointCloud& cloud, const Vec3& origin, double cell) {
  std::unordered_set<std::uint64_t> cells;
  cells.reserve(std::size_t(cloud.size()));
  for (const Vec3& p : cloud.points) cells.insert(cell_key(p, origin, cell));
  return static_cast<Index>(cells.size());
}

}  // namespace

std::vector<Index> uniform_sample(const PointCloud& cloud, const KdTree& tree, Index target,
                                  std::uint64_t seed) {
  (void)tree;
  require(target >= 1, "uniform_sample: target must be >= 1");
  require(!cloud.empty(), "uniform_sample: empty cloud");
  const Index n = cloud.size();
  if (target >= n) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) all[std::size_t(i)] = i;
    return all;
  }

  Rng rng = Rng::derive(seed, 0x5a3c);
  const auto [lo, hi] = bounding_box(cloud.points);
  const Vec3 extent = hi - lo;
  const double diag = std::max(extent.norm(), 1e-12);
  const Vec3 jitter(rng.uniform(), rng.uniform(), rng.uniform());

  // Bisect the cell size: occupancy is monotone (non-increasing) in cell
  // size up to jitter effects, which is enough to land near the target.
  double size_lo = diag * 1e-4, size_hi = diag;
  Vec3 origin;
  double cell = size_hi;
  Index occupied = 0;
  for (int it = 0; it < 48; ++it) {
    cell = 0.5 * (size_lo + size_hi);
    origin = lo - jitter * cell;
    occupied = count_occupied(cloud, origin, cell);
    if (occupied > target)
      size_lo = cell;
    else if (occupied < target)
      size_hi = cell;
    else
      break;
  }

  // Representative per occupied cell: member nearest to the member centroid.
  std::unordered_map<std::uint64_t, std::vector<Index>> cells;
  for (Index i = 0; i < n; ++i) cells[cell_key(cloud.point(i), origin, cell)].push_back(i);
  std::vector<Index> picks;
  picks.reserve(cells.size());
  for (auto& [key, members] : cells) {
    Vec3 centroid = Vec3::Zero();
    for (Index i : members) centroid += cloud.point(i);
    centroid /= double(members.size());
    Index best = members.front();
    double best_d2 = kInfinity;
    for (Index i : members) {
      const double d2 = (cloud.point(i) - centroid).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
        best_d2 = d2;
        best = i;
      }
    }
    picks.push_back(best);
  }
  std::sort(picks.begin(), picks.end());

  if (static_cast<Index>(picks.size()) > target) {
    // Seeded trim keeps exactly `target` representatives.
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const std::size_t j = i + std::size_t(rng.uniform_index(picks.size() - i));
      std::swap(picks[i], picks[j]);
    }
    picks.resize(std::size_t(target));
    std::sort(picks.begin(), picks.end());
  }
  return picks;
}

std::vector<Index> random_sample(const PointCloud& cloud, Index target, std::uint64_t seed) {
  require(target >= 1, "random_sample: target must be >= 1");
  require(!cloud.empty(), "random_sample: empty cloud");
  Rng rng = Rng::derive(seed, 0x7e11);
  auto picks = rng.sample_without_replacement(cloud.size(), target);
  std::sort(picks.begin(), picks.end());
  return picks;
}

NormalEstimate estimate_normals(const PointCloud& cloud, const KdTree& tree, double radius) {
  require(radius > 0.0, "estimate_normals: radius must be positive");
  require(!cloud.empty(), "estimate_normals: empty cloud");
  const Index n = cloud.size();

  NormalEstimate result;
  result.cloud = cloud;
  std::vector<Vec3> normals(std::size_t(n), Vec3::Zero());
  std::vector<char> valid(std::size_t(n), 0);

  parallel_for(n, [&](Index i) {
    const auto nbrs = tree.radius_query(cloud.point(i), radius);
    if (static_cast<Index>(nbrs.size()) < 4) return;  // self plus < 3 others
    Vec3 mean = Vec3::Zero();
    for (Index j : nbrs) mean += cloud.point(j);
    mean /= double(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (Index j : nbrs) {
      const Vec3 d = cloud.point(j) - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    normals[std::size_t(i)] = solver.eigenvectors().col(0).normalized();
    valid[std::size_t(i)] = 1;
  });

  for (Index i = 0; i < n; ++i)
    if (!valid[std::size_t(i)]) result.flagged.push_back(i);
  if (static_cast<Index>(result.flagged.size()) == n) return result;  // nothing estimable

  // Sign consistency: breadth-first propagation over a k-nearest graph,
  // component seeds oriented by a fixed lexicographic rule.
  const Index k_link = std::min<Index>(n, 11);  // self + up to 10 neighbors
  std::vector<char> visited(std::size_t(n), 0);
  std::deque<Index> queue;
  for (Index seed = 0; seed < n; ++seed) {
    if (visited[std::size_t(seed)] || !valid[std::size_t(seed)]) continue;
    Vec3& sn = normals[std::size_t(seed)];
    if (sn.z() < 0 || (sn.z() == 0 && (sn.y() < 0 || (sn.y() == 0 && sn.x() < 0)))) sn = -sn;
    visited[std::size_t(seed)] = 1;
    queue.push_back(seed);
    while (!queue.empty()) {
      const Index cur = queue.front();
      queue.pop_front();
      for (Index j : tree.nearest_query(cloud.point(cur), k_link)) {
        if (visited[std::size_t(j)] || !valid[std::size_t(j)]) continue;
        if (normals[std::size_t(j)].dot(normals[std::size_t(cur)]) < 0.0)
          normals[std::size_t(j)] = -normals[std::size_t(j)];
        visited[std::size_t(j)] = 1;
        queue.push_back(j);
      }
    }
  }

  // Flagged points inherit the nearest estimable normal so the cloud keeps a
  // full unit-normal array.
  for (Index i : result.flagged) {
    for (Index j : tree.nearest_query(cloud.point(i), n)) {
      if (valid[std::size_t(j)]) {
        normals[std::size_t(i)] = normals[std::size_t(j)];
        break;
      }
    }
  }

  result.cloud.normals = std::move(normals);
  return result;
}

}  // namespace sgc
