#pragma once

#include "sgc/descriptor.hpp"
#include "sgc/synthetic.hpp"
#include "sgc/transform.hpp"

#include <algorithm>
#include <filesystem>
#include <random>
#include <vector>

namespace sgc::test {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sgc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline RigidTransform random_rigid(Rng& rng, double translation_scale) {
  RigidTransform t;
  t.rotation = rng.random_rotation();
  t.translation = rng.gaussian3(translation_scale);
  return t;
}

inline std::vector<Index> brute_force_radius(const std::vector<Vec3>& points, const Vec3& center,
                                             double radius) {
  std::vector<Index> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < points.size(); ++i)
    if ((points[i] - center).squaredNorm() <= r2) out.push_back(Index(i));
  return out;
}

inline std::vector<Index> brute_force_nearest(const std::vector<Vec3>& points, const Vec3& query,
                                              Index k) {
  std::vector<std::pair<double, Index>> all;
  for (std::size_t i = 0; i < points.size(); ++i)
    all.emplace_back((points[i] - query).squaredNorm(), Index(i));
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (Index i = 0; i < k; ++i) out.push_back(all[std::size_t(i)].second);
  return out;
}

/// Dense double loop over all K^3 voxel pairs; the oracle implementation of
/// the descriptor comparison, independent of the sparse merge path.
inline double naive_similarity(const SgcDescriptor& a, const SgcDescriptor& b) {
  const double epsilon = 0.5 * (a.params.epsilon + b.params.epsilon);
  double sum = 0.0;
  for (Index i = 0; i < a.params.voxel_count(); ++i)
    sum += voxel_similarity(a.feature_at(i), b.feature_at(i), epsilon);
  return sum;
}

/// Distinctive test surface: dense bumpy height field, pr = 1. The bump
/// density/steepness leaves no flat patches, so registration is anchored
/// in-plane and local shapes are distinctive.
inline PointCloud standard_surface(std::uint64_t seed, Index nx = 80, Index ny = 80) {
  const Index bumps = std::max<Index>(8, nx * ny / 90);
  return make_bumpy_surface(nx, ny, 1.0, bumps, 6.0, 3.0, 6.0, seed);
}

/// Random descriptor with plausible sparse voxel content (for similarity and
/// serialization tests that do not need a real support behind it).
inline SgcDescriptor random_descriptor(Rng& rng, const SgcParams& params) {
  SgcDescriptor d;
  d.params = params;
  d.scan_id = "synthetic";
  d.feature_index = 0;
  const double edge = params.voxel_edge();
  const Index total = params.voxel_count();
  const Index nonempty = 20 + Index(rng.uniform_index(40));
  auto cells = rng.sample_without_replacement(total, nonempty);
  std::sort(cells.begin(), cells.end());
  for (Index c : cells) {
    SparseVoxel v;
    v.index = std::uint32_t(c);
    v.count = 1 + std::uint32_t(rng.uniform_index(30));
    v.centroid = Vec3(rng.uniform(0.0, edge), rng.uniform(0.0, edge), rng.uniform(0.0, edge));
    d.voxels.push_back(v);
  }
  return d;
}

inline double max_axis_angle(const Mat3& a, const Mat3& b) {
  double worst = 0.0;
  for (int r = 0; r < 3; ++r) {
    const double c = std::clamp(a.row(r).dot(b.row(r)), -1.0, 1.0);
    worst = std::max(worst, std::acos(c));
  }
  return worst;
}

}  // namespace sgc::test
