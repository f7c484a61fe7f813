#pragma once

#include "sgc/boundary.hpp"
#include "sgc/graph.hpp"
#include "sgc/registration.hpp"

#include <filesystem>
#include <map>

namespace sgc {

// ---------------------------------------------------------------------------
// Nuisance injection
// ---------------------------------------------------------------------------

/// Adds zero-mean Gaussian noise with per-axis std sigma_in_pr * pr to every
/// coordinate. Normals are carried over unchanged. Deterministic per seed.
/// `pr` may be supplied to skip recomputing the resolution.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma_in_pr, std::uint64_t seed,
                              std::optional<double> pr = std::nullopt);

/// Uniform random subset of ceil(fraction * N) points, original order kept.
PointCloud downsample(const PointCloud& cloud, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic scenes and ground truth
// ---------------------------------------------------------------------------

struct GroundTruth {
  std::vector<RigidTransform> transforms;          // model -> scene, per model
  std::vector<std::pair<Index, Index>> ranges;     // per model: [begin, end) in scene
  double tolerance = 0.0;                          // correspondence radius
};

struct Scene {
  PointCloud cloud;
  GroundTruth ground_truth;
};

/// Union of the transformed models; ground truth records the poses and the
/// per-model point ranges. Sizes of `models` and `transforms` must agree.
Scene make_scene(std::span<const PointCloud> models, std::span<const RigidTransform> transforms,
                 double tolerance);

/// Scene with a seeded random pose per model (rotation uniform, translation
/// scattering the models apart by their bounding radii).
Scene make_scene(std::span<const PointCloud> models, std::uint64_t seed, double tolerance);

// ---------------------------------------------------------------------------
// RP curves
// ---------------------------------------------------------------------------

struct RpInputs {
  std::vector<SgcDescriptor> model_descriptors;  // pooled over all models
  std::vector<Vec3> model_points;                // feature positions, model frame
  std::vector<int> model_of;                     // model index per feature
  std::vector<SgcDescriptor> scene_descriptors;
  std::vector<Vec3> scene_points;                // feature positions, scene frame
};

struct RpCurve {
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
};

/// One precision/recall point per threshold. A scene feature declares a
/// match when its best-scoring model feature exceeds the threshold; the
/// match is correct when the ground-truth image of the scene point lands
/// within the tolerance of the matched model point. Precision over declared
/// matches (1 by convention when nothing is declared), recall over scene
/// features that have any valid correspondent. An empty grid requests an
/// automatic 64-point sweep of the observed score range.
RpCurve rp_curve(const RpInputs& inputs, const GroundTruth& gt,
                 std::span<const double> thresholds, int threads = 0);

/// Evenly spaced thresholds spanning the score range, padded so the loosest
/// grid point declares everything and the tightest declares nothing.
std::vector<double> make_threshold_grid(std::span<const double> scores, Index count);

/// Max recall among grid points with precision >= min_precision (0 if none).
double recall_at_precision(const RpCurve& curve, double min_precision);

// ---------------------------------------------------------------------------
// CMC curves
// ---------------------------------------------------------------------------

enum class CmcMode { Exhaustive, Graph };

struct CmcQuery {
  SgcDescriptor descriptor;
  Index true_node = -1;  // the corresponding node in the graph
};

struct CmcCurve {
  std::vector<double> hit_rate;  // hit_rate[n-1]: true node within top n
  double mean_query_seconds = 0.0;
};

/// Fraction of queries whose true correspondent appears among the top n
/// retrieved, for n = 1..n_max, plus the mean query wall time.
CmcCurve cmc_curve(const DescriptorGraph& graph, std::span<const SgcDescriptor> corpus,
                   std::span<const CmcQuery> queries, Index n_max, CmcMode mode,
                   const SaliencyParams& params);

// ---------------------------------------------------------------------------
// Curve output and experiment manifests
// ---------------------------------------------------------------------------

/// CSV with a header row, plus a gnuplot-ready whitespace table when
/// table_path is non-empty. Writes are atomic.
void write_rp_curve(const RpCurve& curve, const std::filesystem::path& csv_path,
                    const std::filesystem::path& table_path = {});
void write_cmc_curve(const CmcCurve& curve, const std::filesystem::path& csv_path,
                     const std::filesystem::path& table_path = {});

/// Key-value manifest: `key = value` lines, '#' comments, comma lists.
struct Manifest {
  std::map<std::string, std::string> values;

  static Manifest parse_file(const std::filesystem::path& path);
  static Manifest parse_text(const std::string& text);

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  Index get_index(const std::string& key, Index fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key,
                                      std::span<const double> fallback) const;
};

/// Runs the experiment a manifest describes (scene synthesis from the listed
/// models, nuisance grid, RP and/or CMC curves) and returns the files
/// written under out_dir. Verbose mode reports per-mode CMC query times on
/// stderr; timings never enter the output files, which stay reproducible.
std::vector<std::filesystem::path> run_eval_manifest(const Manifest& manifest,
                                                     const std::filesystem::path& out_dir,
                                                     int threads = 0, bool verbose = false);

}  // namespace sgc
