#pragma once

#include "sgc/lrf.hpp"

#include <cstdint>
#include <span>

namespace sgc {

/// Generation parameters for one descriptor run. Lengths are absolute; use
/// from_resolution() to derive them from a cloud's resolution the usual way
/// (R = 20 pr, K = 8, r = R for interior matching or 0.5 R near boundaries).
struct SgcParams {
  double descriptor_radius = 0.0;  // R: half edge of the cubical support
  double lrf_radius = 0.0;         // r: spherical support radius, r <= R
  int grid_resolution = 8;         // K: voxels per axis
  double epsilon = 0.0;            // similarity regularizer (squared length)

  static SgcParams from_resolution(double pr, double radius_in_pr = 20.0,
                                   double lrf_factor = 1.0, int grid = 8);

  double voxel_edge() const { return 2.0 * descriptor_radius / double(grid_resolution); }
  Index voxel_count() const {
    return Index(grid_resolution) * grid_resolution * grid_resolution;
  }
  void validate() const;
};

/// Per-voxel feature: point count and the point centroid expressed as an
/// offset from the voxel's minimum corner. Empty voxels are all zero.
struct VoxelFeature {
  std::uint32_t count = 0;
  Vec3 centroid = Vec3::Zero();
};

/// Non-empty voxel in a descriptor; `index` is the linear voxel id with x
/// fastest, then y, then z.
struct SparseVoxel {
  std::uint32_t index = 0;
  std::uint32_t count = 0;
  Vec3 centroid = Vec3::Zero();
};

/// Voxelized local shape signature. Only non-empty voxels are stored, in
/// ascending voxel order; feature_at() exposes the dense K^3 view.
struct SgcDescriptor {
  SgcParams params;
  Lrf lrf;  // origin is the feature point position
  Index feature_index = -1;
  std::string scan_id;
  std::vector<SparseVoxel> voxels;

  const Vec3& feature_point() const { return lrf.origin; }
  VoxelFeature feature_at(Index linear_index) const;
  std::uint64_t total_points() const;
};

/// Bins every cloud point falling inside the cubical volume [-R, R]^3 in LRF
/// coordinates into the K^3 grid and extracts count + centroid per voxel.
/// A coordinate exactly at +R clamps to the last voxel; points with any
/// |coordinate| >= R are outside the cube and ignored.
SgcDescriptor compute_descriptor(const PointCloud& cloud, const KdTree& tree,
                                 Index feature_index, const Lrf& lrf, const SgcParams& params);

/// Similarity of one voxel pair: 0 when either is empty, otherwise
/// ln(N_a N_b / (|C_a - C_b|^2 + epsilon)). May be negative.
inline double voxel_similarity(const VoxelFeature& a, const VoxelFeature& b, double epsilon) {
  if (a.count == 0 || b.count == 0) return 0.0;
  const double d2 = (a.centroid - b.centroid).squaredNorm();
  return std::log(double(a.count) * double(b.count) / (d2 + epsilon));
}

/// Sum of voxel similarities over corresponding voxels. Only pairs that are
/// non-empty on both sides contribute, which is what lets descriptors from
/// incomplete supports (scan boundaries, holes) still match their complete
/// counterparts. Grid resolutions must agree; the regularizer is the mean
/// of the two descriptors' epsilons, keeping the score exactly symmetric.
double descriptor_similarity(const SgcDescriptor& a, const SgcDescriptor& b);

/// Centroid quantized to a Q^3 lattice and packed into one integer:
/// code = (z_q * Q + y_q) * Q + x_q. Empty voxels store (0, 0).
struct CompressedVoxel {
  std::uint32_t code = 0;
  std::uint32_t count = 0;
};

/// Dense K^3 list of compressed voxels for serialization. Q >= 2 and Q^3
/// must fit 32 bits.
std::vector<CompressedVoxel> compress(const SgcDescriptor& descriptor, std::uint32_t q = 256);

/// Inverse of compress; centroids land on quantization cell centers, so each
/// component is reproduced within L/Q. Codes of non-empty voxels must be
/// below Q^3; the code of an empty voxel is ignored.
std::vector<SparseVoxel> decompress(std::span<const CompressedVoxel> compressed,
                                    const SgcParams& params, std::uint32_t q = 256);

// ---------------------------------------------------------------------------
// Batch construction
// ---------------------------------------------------------------------------

struct DescriptorBatch {
  std::vector<SgcDescriptor> descriptors;
  std::vector<Index> skipped;  // feature points with degenerate or ambiguous LRFs
};

/// Descriptor per feature point. Cloud normals (when present) disambiguate
/// the LRF z axis. Feature points whose LRF errors or is flagged ambiguous
/// are skipped and reported. Deterministic for any thread count.
DescriptorBatch describe_cloud(const PointCloud& cloud, const KdTree& tree,
                               std::span<const Index> feature_indices, const SgcParams& params,
                               int threads = 0);

}  // namespace sgc
