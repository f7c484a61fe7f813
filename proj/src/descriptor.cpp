#include "sgc/descriptor.hpp"

#include <algorithm>

namespace sgc {

SgcParams SgcParams::from_resolution(double pr, double radius_in_pr, double lrf_factor,
                                     int grid) {
  require(pr > 0.0, "SgcParams: resolution must be positive");
  SgcParams p;
  p.descriptor_radius = radius_in_pr * pr;
  p.lrf_radius = lrf_factor * p.descriptor_radius;
  p.grid_resolution = grid;
  const double edge = p.voxel_edge();
  p.epsilon = (0.01 * edge) * (0.01 * edge);
  p.validate();
  return p;
}

void SgcParams::validate() const {
  require(descriptor_radius > 0.0, "SgcParams: descriptor radius must be positive");
  require(lrf_radius > 0.0 && lrf_radius <= descriptor_radius,
          "SgcParams: LRF radius must satisfy 0 < r <= R");
  require(grid_resolution >= 1, "SgcParams: grid resolution must be >= 1");
  require(epsilon > 0.0, "SgcParams: epsilon must be positive");
}

VoxelFeature SgcDescriptor::feature_at(Index linear_index) const {
  const auto it = std::lower_bound(
      voxels.begin(), voxels.end(), linear_index,
      [](const SparseVoxel& v, Index key) { return Index(v.index) < key; });
  if (it == voxels.end() || Index(it->index) != linear_index) return {};
  return {it->count, it->centroid};
}

std::uint64_t SgcDescriptor::total_points() const {
  std::uint64_t sum = 0;
  for (const SparseVoxel& v : voxels) sum += v.count;
  return sum;
}

SgcDescriptor compute_descriptor(const PointCloud& cloud, const KdTree& tree,
                                 Index feature_index, const Lrf& lrf, const SgcParams& params) {
  params.validate();
  const double radius = params.descriptor_radius;
  const int k = params.grid_resolution;
  const double edge = params.voxel_edge();

  SgcDescriptor descriptor;
  descriptor.params = params;
  descriptor.lrf = lrf;
  descriptor.feature_index = feature_index;
  descriptor.scan_id = cloud.id;

  // Candidates from the sphere circumscribing the cube, then the exact cube
  // membership test in LRF coordinates.
  const auto candidates = tree.radius_query(lrf.origin, radius * std::sqrt(3.0));
  std::vector<std::uint32_t> counts(std::size_t(params.voxel_count()), 0);
  std::vector<Vec3> sums(std::size_t(params.voxel_count()), Vec3::Zero());
  for (Index i : candidates) {
    const Vec3 local = lrf.to_local(cloud.point(i));
    if (local.cwiseAbs().maxCoeff() >= radius) continue;
    int cell[3];
    for (int c = 0; c < 3; ++c)
      cell[c] = std::min(k - 1, int((local[c] + radius) / edge));
    const Index linear = (Index(cell[2]) * k + cell[1]) * k + cell[0];
    counts[std::size_t(linear)] += 1;
    sums[std::size_t(linear)] += local;
  }

  for (Index linear = 0; linear < params.voxel_count(); ++linear) {
    const std::uint32_t n = counts[std::size_t(linear)];
    if (n == 0) continue;
    const int ix = int(linear % k);
    const int iy = int((linear / k) % k);
    const int iz = int(linear / (Index(k) * k));
    const Vec3 corner(-radius + ix * edge, -radius + iy * edge, -radius + iz * edge);
    Vec3 offset = sums[std::size_t(linear)] / double(n) - corner;
    for (int c = 0; c < 3; ++c)  // guard fp rounding at the upper voxel face
      offset[c] = std::clamp(offset[c], 0.0, std::nextafter(edge, 0.0));
    descriptor.voxels.push_back({std::uint32_t(linear), n, offset});
  }
  return descriptor;
}

double descriptor_similarity(const SgcDescriptor& a, const SgcDescriptor& b) {
  require(a.params.grid_resolution == b.params.grid_resolution,
          "descriptor_similarity: grid resolutions differ");
  const double epsilon = 0.5 * (a.params.epsilon + b.params.epsilon);
  double sum = 0.0;
  auto ia = a.voxels.begin();
  auto ib = b.voxels.begin();
  while (ia != a.voxels.end() && ib != b.voxels.end()) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      const double d2 = (ia->centroid - ib->centroid).squaredNorm();
      sum += std::log(double(ia->count) * double(ib->count) / (d2 + epsilon));
      ++ia;
      ++ib;
    }
  }
  return sum;
}

std::vector<CompressedVoxel> compress(const SgcDescriptor& descriptor, std::uint32_t q) {
  require(q >= 2, "compress: quantization level must be >= 2");
  require(std::uint64_t(q) * q * q <= std::uint64_t(1) << 32,
          "compress: quantization level overflows 32-bit codes");
  const double edge = descriptor.params.voxel_edge();
  std::vector<CompressedVoxel> out(std::size_t(descriptor.params.voxel_count()));
  for (const SparseVoxel& v : descriptor.voxels) {
    std::uint32_t cell[3];
    for (int c = 0; c < 3; ++c) {
      const double t = v.centroid[c] / edge * double(q);
      cell[c] = std::min<std::uint32_t>(q - 1, std::uint32_t(std::max(0.0, t)));
    }
    out[v.index] = {(cell[2] * q + cell[1]) * q + cell[0], v.count};
  }
  return out;
}

std::vector<SparseVoxel> decompress(std::span<const CompressedVoxel> compressed,
                                    const SgcParams& params, std::uint32_t q) {
  require(q >= 2, "decompress: quantization level must be >= 2");
  const double cell_edge = params.voxel_edge() / double(q);
  std::vector<SparseVoxel> out;
  for (std::size_t i = 0; i < compressed.size(); ++i) {
    const CompressedVoxel& cv = compressed[i];
    if (cv.count == 0) continue;  // code ignored for empty voxels
    require(std::uint64_t(cv.code) < std::uint64_t(q) * q * q,
            "decompress: voxel code out of range");
    const std::uint32_t x = cv.code % q;
    const std::uint32_t y = (cv.code / q) % q;
    const std::uint32_t z = cv.code / (q * q);
    const Vec3 centroid((x + 0.5) * cell_edge, (y + 0.5) * cell_edge, (z + 0.5) * cell_edge);
    out.push_back({std::uint32_t(i), cv.count, centroid});
  }
  return out;
}

DescriptorBatch describe_cloud(const PointCloud& cloud, const KdTree& tree,
                               std::span<const Index> feature_indices, const SgcParams& params,
                               int threads) {
  params.validate();
  const Index n = static_cast<Index>(feature_indices.size());
  std::vector<SgcDescriptor> slots(static_cast<std::size_t>(n));
  std::vector<char> ok(std::size_t(n), 0);

  parallel_for(
      n,
      [&](Index i) {
        const Index point_index = feature_indices[std::size_t(i)];
        const Vec3& p = cloud.point(point_index);
        Support support;
        try {
          support = extract_support(cloud, tree, p, params.lrf_radius);
        } catch (const Error&) {
          return;
        }
        std::optional<Vec3> normal;
        if (cloud.has_normals()) normal = cloud.normal(point_index);
        LrfResult lrf;
        try {
          lrf = compute_lrf(cloud, support, normal);
        } catch (const Error&) {
          return;
        }
        if (lrf.ambiguous) return;
        slots[std::size_t(i)] =
            compute_descriptor(cloud, tree, point_index, lrf.lrf, params);
        ok[std::size_t(i)] = 1;
      },
      threads);

  DescriptorBatch batch;
  batch.descriptors.reserve(std::size_t(n));
  for (Index i = 0; i < n; ++i) {
    if (ok[std::size_t(i)])
      batch.descriptors.push_back(std::move(slots[std::size_t(i)]));
    else
      batch.skipped.push_back(feature_indices[std::size_t(i)]);
  }
  return batch;
}

}  // namespace sgc
