#include "sgc/cloud_io.hpp"
#include "sgc/eval.hpp"
#include "sgc/sampling.hpp"

#include <iostream>
#include <sstream>

namespace sgc {

namespace fs = std::filesystem;

namespace {

std::string grid_tag(double sigma, double fraction) {
  std::ostringstream ss;
  ss << "s" << sigma << "_d" << fraction;
  std::string tag = ss.str();
  for (char& c : tag)
    if (c == '.') c = 'p';
  return tag;
}

}  // namespace

std::vector<fs::path> run_eval_manifest(const Manifest& manifest, const fs::path& out_dir,
                                        int threads, bool verbose) {
  std::vector<std::string> model_paths = manifest.get_list("models");
  if (model_paths.empty() && manifest.has("model")) model_paths = manifest.get_list("model");
  require(!model_paths.empty(), "eval manifest: no 'models' entry");

  std::vector<PointCloud> models;
  for (const std::string& entry : model_paths) {
    if (!fs::exists(entry)) fail("eval manifest: missing model '" + entry + "'");
    models.push_back(load_cloud(entry));
  }

  const std::uint64_t seed = std::uint64_t(manifest.get_index("seed", 0));
  const Index feature_count = manifest.get_index("feature_count", 500);
  const double radius_pr = manifest.get_double("radius_pr", 20.0);
  const double lrf_factor = manifest.get_double("lrf_factor", 1.0);
  const int grid = int(manifest.get_index("grid", 8));
  const double gt_tolerance_pr = manifest.get_double("gt_tolerance_pr", 2.0);
  const std::string curve_kind = manifest.get(std::string("curve"), "rp");
  require(curve_kind == "rp" || curve_kind == "cmc" || curve_kind == "both",
          "eval manifest: 'curve' must be rp, cmc or both");
  const double default_sigma[] = {0.0};
  const double default_fraction[] = {1.0};
  const auto sigmas = manifest.get_double_list("noise_sigmas_pr", default_sigma);
  const auto fractions = manifest.get_double_list("downsample_fractions", default_fraction);
  const Index cmc_max_rank = manifest.get_index("cmc_max_rank", 20);
  const std::string prefix = manifest.get(std::string("out_prefix"), "curve");

  fs::create_directories(out_dir);

  // Common resolution over the models fixes the descriptor scale.
  double pr = 0.0;
  std::vector<KdTree> model_trees;
  for (const PointCloud& m : models) {
    model_trees.emplace_back(m.points);
    pr += compute_resolution(m, model_trees.back()).pr;
  }
  pr /= double(models.size());
  const SgcParams params = SgcParams::from_resolution(pr, radius_pr, lrf_factor, grid);

  // Scene: every model placed with a seeded random pose.
  Scene scene = make_scene(models, seed, gt_tolerance_pr * pr);

  // Model features and descriptors, pooled (computed once on clean models).
  RpInputs inputs;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto picks = random_sample(models[m], feature_count, seed + 17 * m);
    auto batch = describe_cloud(models[m], model_trees[m], picks, params, threads);
    for (SgcDescriptor& d : batch.descriptors) {
      inputs.model_points.push_back(d.feature_point());
      inputs.model_of.push_back(int(m));
      inputs.model_descriptors.push_back(std::move(d));
    }
  }
  require(!inputs.model_descriptors.empty(), "eval manifest: no model descriptors");

  std::vector<fs::path> written;
  for (double fraction : fractions) {
    for (double sigma : sigmas) {
      const std::uint64_t cell_seed =
          seed ^ (std::uint64_t(std::llround(sigma * 1000)) << 20) ^
          std::uint64_t(std::llround(fraction * 1000));
      PointCloud nuisanced = downsample(scene.cloud, fraction, cell_seed);
      nuisanced = add_gaussian_noise(nuisanced, sigma, cell_seed + 1, pr);
      const KdTree scene_tree(nuisanced.points);

      // Scene features: ground-truth correspondents of the model features,
      // snapped to the nearest surviving scene point.
      inputs.scene_descriptors.clear();
      inputs.scene_points.clear();
      std::vector<Index> scene_feature_points;
      std::vector<Index> source_feature;  // pooled model feature per query
      for (std::size_t f = 0; f < inputs.model_descriptors.size(); ++f) {
        const int m = inputs.model_of[f];
        const Vec3 in_scene =
            scene.ground_truth.transforms[std::size_t(m)].apply(inputs.model_points[f]);
        scene_feature_points.push_back(scene_tree.nearest_one(in_scene));
        source_feature.push_back(Index(f));
      }
      auto scene_batch =
          describe_cloud(nuisanced, scene_tree, scene_feature_points, params, threads);
      // Track which queries survived LRF screening.
      std::vector<Index> surviving_source;
      {
        std::size_t cursor = 0;
        for (std::size_t f = 0; f < scene_feature_points.size(); ++f) {
          if (cursor < scene_batch.skipped.size() &&
              scene_batch.skipped[cursor] == scene_feature_points[f]) {
            ++cursor;
            continue;
          }
          surviving_source.push_back(source_feature[f]);
        }
      }
      for (SgcDescriptor& d : scene_batch.descriptors) {
        inputs.scene_points.push_back(d.feature_point());
        inputs.scene_descriptors.push_back(std::move(d));
      }
      require(inputs.scene_descriptors.size() == surviving_source.size(),
              "eval manifest: scene feature bookkeeping out of sync");

      const std::string tag = grid_tag(sigma, fraction);
      if (curve_kind == "rp" || curve_kind == "both") {
        const RpCurve curve = rp_curve(inputs, scene.ground_truth, {}, threads);
        const fs::path csv = out_dir / (prefix + "_rp_" + tag + ".csv");
        const fs::path dat = out_dir / (prefix + "_rp_" + tag + ".dat");
        write_rp_curve(curve, csv, dat);
        written.push_back(csv);
        written.push_back(dat);
      }
      if (curve_kind == "cmc" || curve_kind == "both") {
        SaliencyParams gp;
        gp.k = int(manifest.get_index("graph_k", 16));
        gp.alpha = manifest.get_double("alpha", 0.2);
        gp.seed = seed;
        const DescriptorGraph graph = build_graph(inputs.model_descriptors, gp, threads);
        std::vector<CmcQuery> queries;
        for (std::size_t qi = 0; qi < inputs.scene_descriptors.size(); ++qi)
          queries.push_back({inputs.scene_descriptors[qi], surviving_source[qi]});
        for (const CmcMode mode : {CmcMode::Graph, CmcMode::Exhaustive}) {
          const CmcCurve curve =
              cmc_curve(graph, inputs.model_descriptors, queries, cmc_max_rank, mode, gp);
          const char* mode_tag = (mode == CmcMode::Graph) ? "graph" : "exhaustive";
          if (verbose)
            std::cerr << "cmc " << mode_tag << " " << tag << ": mean query time "
                      << curve.mean_query_seconds * 1e3 << " ms\n";
          const fs::path csv = out_dir / (prefix + "_cmc_" + mode_tag + "_" + tag + ".csv");
          const fs::path dat = out_dir / (prefix + "_cmc_" + mode_tag + "_" + tag + ".dat");
          write_cmc_curve(curve, csv, dat);
          written.push_back(csv);
          written.push_back(dat);
        }
      }
    }
  }
  return written;
}

}  // namespace sgc
