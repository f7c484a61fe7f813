#pragma once

#include "sgc/descriptor.hpp"
#include "sgc/graph.hpp"
#include "sgc/transform.hpp"

#include <filesystem>
#include <optional>

namespace sgc {

/// Transform that carries lrf_d's frame onto lrf_r's: the rotation is
/// axes_r^T * axes_d and the translation maps origin to origin, so local
/// coordinates agree after the move.
RigidTransform transform_from_lrfs(const Lrf& lrf_d, const Lrf& lrf_r);

/// Fraction of transformed data points whose nearest reference point lies
/// within dist_threshold, normalized by the smaller cloud size and clamped
/// to [0, 1].
double overlap_ratio(const PointCloud& cloud_d, const PointCloud& cloud_r, const KdTree& tree_r,
                     const RigidTransform& transform, double dist_threshold, int threads = 0);

struct IcpResult {
  RigidTransform transform;
  std::vector<double> rms_trace;  // accepted per-iteration rms, non-increasing
  int iterations = 0;
  bool converged = false;
  double final_rms() const { return rms_trace.empty() ? kInfinity : rms_trace.back(); }
};

/// Point-to-point ICP: alternates nearest-neighbor correspondence (pairs
/// beyond dist_threshold rejected) with a least-squares rigid fit (SVD).
/// Stops at max_iterations or when an iteration's fit lowers the rms over
/// its own correspondence set by less than improvement_tol, i.e. the
/// transform has stopped moving. Pairs whose reference point is flagged in
/// exclude_ref (typically the reference scan's boundary) are rejected, which
/// removes the edge-attraction bias of partially overlapping scans.
/// Errors when fewer than 3 correspondences survive at any iteration.
IcpResult icp_refine(const PointCloud& cloud_d, const PointCloud& cloud_r, const KdTree& tree_r,
                     const RigidTransform& initial, int max_iterations, double dist_threshold,
                     double improvement_tol = 1e-6, int threads = 0,
                     const std::vector<char>* exclude_ref = nullptr);

struct MatchCandidate {
  Index data_feature = -1;  // cloud point index of the data feature
  Index ref_feature = -1;   // cloud point index of the reference feature
  double score = 0.0;
  double enhanced_score = 0.0;  // equals score when no saliency is in play
  RigidTransform transform;
  double overlap = -1.0;  // filled for evaluated candidates
};

struct RegisterConfig {
  double radius_in_pr = 20.0;  // descriptor radius R in multiples of pr
  double lrf_factor = 0.5;     // r = factor * R; 0.5 tolerates scan boundaries
  int grid_resolution = 8;
  Index feature_count = 500;  // M feature points per scan
  double threshold_percentile = 0.6;
  std::optional<double> absolute_threshold;  // overrides the percentile
  int top_candidates = 5;
  double overlap_distance_in_pr = 2.0;
  bool run_icp = true;
  int icp_max_iterations = 100;
  double icp_distance_in_pr = 2.0;
  double icp_improvement_tol = 1e-9;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct RegistrationResult {
  bool found = false;  // false: no candidate cleared the similarity threshold
  RigidTransform transform;          // final (ICP-refined when enabled)
  RigidTransform pre_icp_transform;  // the chosen LRF-aligned candidate
  double overlap = 0.0;              // of the final transform
  Index candidates_tried = 0;
  int icp_iterations = 0;
  double final_rms = kInfinity;
  double similarity_threshold = 0.0;
  double resolution = 0.0;  // common pr the run used
  std::vector<MatchCandidate> candidates;  // evaluated candidates, best first
  std::vector<double> icp_trace;
};

/// The four-step pipeline: sample M feature points per scan, describe them,
/// pair each data descriptor with its best reference descriptor, keep pairs
/// above the threshold, evaluate the top candidates by overlap ratio, and
/// optionally refine the winner with ICP.
RegistrationResult register_pair(const PointCloud& scan_d, const PointCloud& scan_r,
                                 const RegisterConfig& config);

/// Candidate/overlap table, chosen transform (4x4 row-major), ICP trace.
void write_registration_report(const RegistrationResult& result, const std::string& data_id,
                               const std::string& ref_id, const std::filesystem::path& path);

struct ReconstructConfig {
  RegisterConfig pairwise;  // descriptor + ICP settings reused per placement
  SaliencyParams graph;
  double min_overlap = 0.15;  // placements below this are rejected
};

struct ScanPose {
  bool placed = false;
  RigidTransform transform;          // scan -> merged frame (final)
  RigidTransform pre_icp_transform;  // accepted candidate before refinement
  double overlap = 0.0;
};

struct ReconstructionResult {
  PointCloud merged;             // deduplicated union in the reference frame
  std::vector<ScanPose> poses;   // one per input scan
  std::vector<Index> unplaced;   // scans with no acceptable match
  Index reference_scan = -1;     // first-registered scan (identity pose)
};

/// Incremental multi-scan alignment: one descriptor-graph over all scans'
/// features answers cross-scan correspondence queries; scans are merged
/// greedily, best-matching first, into a growing cloud deduplicated by
/// voxel binning at pr / 2.
ReconstructionResult reconstruct(std::span<const PointCloud> scans,
                                 const ReconstructConfig& config);

}  // namespace sgc
