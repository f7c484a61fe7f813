#include "sgc/cloud_io.hpp"
#include "sgc/descriptor_io.hpp"
#include "sgc/eval.hpp"
#include "sgc/sampling.hpp"
#include "sgc/synthetic.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace sgc;

struct GlobalOptions {
  std::uint64_t seed = 0;
  int threads = 0;
  bool verbose = false;
};

struct DescribeOptions {
  std::string input, output;
  Index features = 500;
  double radius_pr = 20.0;
  double lrf_factor = 1.0;
  int grid = 8;
  std::uint32_t quant = 256;
  std::string sampling = "uniform";
};

struct SgcFlags {
  double radius_pr = 20.0;
  double lrf_factor = 0.5;
  int grid = 8;
  Index features = 500;
  int top = 5;
  double threshold_percentile = 0.6;
  double absolute_threshold = std::numeric_limits<double>::quiet_NaN();
  bool no_icp = false;
  int icp_iterations = 60;
  double overlap_dist_pr = 2.0;
};

RegisterConfig to_register_config(const SgcFlags& flags, const GlobalOptions& global) {
  RegisterConfig config;
  config.radius_in_pr = flags.radius_pr;
  config.lrf_factor = flags.lrf_factor;
  config.grid_resolution = flags.grid;
  config.feature_count = flags.features;
  config.threshold_percentile = flags.threshold_percentile;
  if (!std::isnan(flags.absolute_threshold)) config.absolute_threshold = flags.absolute_threshold;
  config.top_candidates = flags.top;
  config.run_icp = !flags.no_icp;
  config.icp_max_iterations = flags.icp_iterations;
  config.overlap_distance_in_pr = flags.overlap_dist_pr;
  config.icp_distance_in_pr = flags.overlap_dist_pr;
  config.seed = global.seed;
  config.threads = global.threads;
  return config;
}

void add_sgc_flags(CLI::App* cmd, SgcFlags& flags, double default_lrf_factor) {
  flags.lrf_factor = default_lrf_factor;
  cmd->add_option("--radius-pr", flags.radius_pr, "Descriptor radius R in multiples of pr");
  cmd->add_option("--lrf-factor", flags.lrf_factor, "LRF radius as a fraction of R");
  cmd->add_option("--grid", flags.grid, "Voxel grid resolution K per axis");
  cmd->add_option("--features", flags.features, "Feature points sampled per scan");
  cmd->add_option("--top", flags.top, "Transform candidates evaluated by overlap");
  cmd->add_option("--threshold-percentile", flags.threshold_percentile,
                  "Percentile of best-pair scores used as the match threshold");
  cmd->add_option("--absolute-threshold", flags.absolute_threshold,
                  "Absolute similarity threshold (overrides the percentile)");
  cmd->add_flag("--no-icp", flags.no_icp, "Skip ICP refinement");
  cmd->add_option("--icp-iters", flags.icp_iterations, "Max ICP iterations");
  cmd->add_option("--overlap-dist-pr", flags.overlap_dist_pr,
                  "Overlap/ICP correspondence distance in multiples of pr");
}

RigidTransform read_transform_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path + ": cannot open transform file");
  double m[16];
  for (double& v : m) {
    in >> v;
    if (in.fail()) fail(path + ": expected 16 numbers (4x4 row-major)");
  }
  RigidTransform t;
  t.rotation << m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10];
  t.translation = Vec3(m[3], m[7], m[11]);
  require(t.is_valid(1e-6), path + ": matrix is not a rigid transform");
  return t;
}

void write_transform_file(const RigidTransform& t, const std::string& path) {
  std::ofstream out(path + ".tmp");
  if (!out) fail(path + ": cannot open for writing");
  out.precision(17);
  const Mat3& r = t.rotation;
  for (int row = 0; row < 3; ++row)
    out << r(row, 0) << " " << r(row, 1) << " " << r(row, 2) << " " << t.translation[row]
        << "\n";
  out << "0 0 0 1\n";
  out.close();
  std::error_code ec;
  std::filesystem::rename(path + ".tmp", path, ec);
  if (ec) fail(path + ": rename failed: " + ec.message());
}

int cmd_describe(const DescribeOptions& opt, const GlobalOptions& global) {
  const PointCloud cloud = load_cloud(opt.input);
  const KdTree tree(cloud.points);
  const double pr = compute_resolution(cloud, tree).pr;
  const SgcParams params =
      SgcParams::from_resolution(pr, opt.radius_pr, opt.lrf_factor, opt.grid);
  std::vector<Index> picks;
  if (opt.sampling == "uniform")
    picks = uniform_sample(cloud, tree, opt.features, global.seed);
  else if (opt.sampling == "random")
    picks = random_sample(cloud, opt.features, global.seed);
  else
    fail("describe: --sampling must be 'uniform' or 'random'");
  const DescriptorBatch batch = describe_cloud(cloud, tree, picks, params, global.threads);
  require(!batch.descriptors.empty(), "describe: no feature point produced a stable LRF");
  save_descriptors(batch.descriptors, opt.output, opt.quant);
  if (global.verbose)
    std::cerr << "describe: " << batch.descriptors.size() << " descriptors ("
              << batch.skipped.size() << " skipped), pr = " << pr << "\n";
  return 0;
}

int main_impl(int argc, char** argv) {
  CLI::App app{"Signature-of-geometric-centroids descriptors for point-cloud matching"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions global;
  if (const char* env = std::getenv("SGC_THREADS")) global.threads = std::atoi(env);
  app.add_option("--seed", global.seed, "Seed for every randomized stage");
  app.add_option("--threads", global.threads, "Worker threads (default: SGC_THREADS or all cores)");
  app.add_flag("-v,--verbose", global.verbose, "Progress output on stderr");

  // describe ----------------------------------------------------------------
  DescribeOptions describe;
  CLI::App* cmd_desc = app.add_subcommand("describe", "Compute descriptors for a cloud");
  cmd_desc->add_option("input", describe.input, "Input cloud (.ply/.xyz)")->required();
  cmd_desc->add_option("-o,--output", describe.output, "Output descriptor file")->required();
  cmd_desc->add_option("--features", describe.features, "Feature points to sample");
  cmd_desc->add_option("--radius-pr", describe.radius_pr, "Descriptor radius in multiples of pr");
  cmd_desc->add_option("--lrf-factor", describe.lrf_factor, "LRF radius as a fraction of R");
  cmd_desc->add_option("--grid", describe.grid, "Voxel grid resolution K per axis");
  cmd_desc->add_option("--quant", describe.quant, "Centroid quantization levels per axis");
  cmd_desc->add_option("--sampling", describe.sampling, "uniform|random feature sampling");

  // register ----------------------------------------------------------------
  struct {
    std::string data, reference, report = "register_report.txt", transform_out, gt;
  } reg;
  SgcFlags reg_flags;
  CLI::App* cmd_reg = app.add_subcommand("register", "Align a data scan to a reference scan");
  cmd_reg->add_option("data", reg.data, "Data scan")->required();
  cmd_reg->add_option("reference", reg.reference, "Reference scan")->required();
  cmd_reg->add_option("-o,--report", reg.report, "Report path");
  cmd_reg->add_option("--transform-out", reg.transform_out, "Write the 4x4 transform here");
  cmd_reg->add_option("--gt", reg.gt, "Ground-truth 4x4 transform for error reporting");
  add_sgc_flags(cmd_reg, reg_flags, 0.5);

  // reconstruct ---------------------------------------------------------------
  struct {
    std::vector<std::string> scans;
    std::string merged = "merged.ply", poses = "poses.txt";
    double min_overlap = 0.15;
    int graph_k = 16;
  } rec;
  SgcFlags rec_flags;
  CLI::App* cmd_rec = app.add_subcommand("reconstruct", "Incrementally align many scans");
  cmd_rec->add_option("scans", rec.scans, "Input scans")->required()->expected(-2);
  cmd_rec->add_option("-o,--merged", rec.merged, "Merged cloud output");
  cmd_rec->add_option("--poses", rec.poses, "Per-scan pose table output");
  cmd_rec->add_option("--min-overlap", rec.min_overlap, "Reject placements below this overlap");
  cmd_rec->add_option("--graph-k", rec.graph_k, "Descriptor-graph out-degree");
  add_sgc_flags(cmd_rec, rec_flags, 0.5);

  // graph ---------------------------------------------------------------------
  struct {
    std::vector<std::string> descriptor_files;
    std::string output = "graph.sgcg", saliency_out;
    int k = 16;
    int build_iterations = 8;
    bool oracle = false;
  } gr;
  CLI::App* cmd_graph = app.add_subcommand("graph", "Build a descriptor-graph with saliency");
  cmd_graph->add_option("descriptors", gr.descriptor_files, "Descriptor files (SGC1)")
      ->required()
      ->expected(-1);
  cmd_graph->add_option("-o,--output", gr.output, "Graph file output");
  cmd_graph->add_option("--k", gr.k, "Out-degree per node");
  cmd_graph->add_option("--build-iters", gr.build_iterations, "Propagation rounds");
  cmd_graph->add_option("--saliency-out", gr.saliency_out, "CSV dump of per-node saliency");
  cmd_graph->add_flag("--oracle", gr.oracle, "Also run brute force and report recall");

  // eval ----------------------------------------------------------------------
  struct {
    std::string manifest;
    std::string out_dir = "eval_out";
  } ev;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Run an evaluation manifest");
  cmd_eval->add_option("manifest", ev.manifest, "Manifest file")->required();
  cmd_eval->add_option("-o,--out-dir", ev.out_dir, "Output directory for curves");

  // augment --------------------------------------------------------------------
  struct {
    std::string input, output;
    double noise_sigma_pr = 0.0;
    double downsample_fraction = 1.0;
    bool ascii = false;
  } aug;
  CLI::App* cmd_aug = app.add_subcommand("augment", "Add noise and/or downsample a cloud");
  cmd_aug->add_option("input", aug.input, "Input cloud")->required();
  cmd_aug->add_option("output", aug.output, "Output cloud")->required();
  cmd_aug->add_option("--noise-sigma-pr", aug.noise_sigma_pr,
                      "Gaussian noise std in multiples of pr");
  cmd_aug->add_option("--downsample", aug.downsample_fraction, "Fraction of points to keep");
  cmd_aug->add_flag("--ascii", aug.ascii, "Write ASCII PLY instead of binary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints the help text, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << "sgc: error: " << e.what() << "\n";
    return 2;
  }

  if (cmd_desc->parsed()) return cmd_describe(describe, global);

  if (cmd_reg->parsed()) {
    const PointCloud data = load_cloud(reg.data);
    const PointCloud reference = load_cloud(reg.reference);
    const RegistrationResult result =
        register_pair(data, reference, to_register_config(reg_flags, global));
    write_registration_report(result, data.id, reference.id, reg.report);
    if (!result.found) {
      std::cerr << "sgc: error: no candidate above the similarity threshold\n";
      return 3;
    }
    if (!reg.transform_out.empty()) write_transform_file(result.transform, reg.transform_out);
    if (!reg.gt.empty()) {
      const RigidTransform gt = read_transform_file(reg.gt);
      const double rot_err = rotation_angle_between(result.transform, gt) * 180.0 / M_PI;
      const double trans_err = (result.transform.translation - gt.translation).norm();
      std::ofstream out(reg.report, std::ios::app);
      out << "gt_rotation_error_deg: " << rot_err << "\n";
      out << "gt_translation_error: " << trans_err << "\n";
      std::cout << "gt_rotation_error_deg " << rot_err << "\n";
      std::cout << "gt_translation_error " << trans_err << "\n";
    }
    std::cout << "overlap " << result.overlap << "\n";
    return 0;
  }

  if (cmd_rec->parsed()) {
    std::vector<PointCloud> scans;
    for (const std::string& path : rec.scans) scans.push_back(load_cloud(path));
    ReconstructConfig config;
    config.pairwise = to_register_config(rec_flags, global);
    config.graph.k = rec.graph_k;
    config.graph.seed = global.seed;
    config.min_overlap = rec.min_overlap;
    const ReconstructionResult result = reconstruct(scans, config);
    save_cloud(result.merged, rec.merged);
    {
      std::ofstream out(rec.poses + ".tmp");
      if (!out) fail(rec.poses + ": cannot open for writing");
      out << "# scan placed transform_row_major(12)\n";
      out.precision(17);
      for (std::size_t s = 0; s < result.poses.size(); ++s) {
        const ScanPose& pose = result.poses[s];
        out << s << " " << (pose.placed ? 1 : 0);
        for (int row = 0; row < 3; ++row)
          for (int col = 0; col < 4; ++col)
            out << " "
                << (col < 3 ? pose.transform.rotation(row, col) : pose.transform.translation[row]);
        out << "\n";
      }
      out.close();
      std::error_code ec;
      std::filesystem::rename(rec.poses + ".tmp", rec.poses, ec);
      if (ec) fail(rec.poses + ": rename failed: " + ec.message());
    }
    // Unplaced scans are a reported outcome, not an error.
    for (Index s : result.unplaced) std::cerr << "sgc: warning: scan " << s << " left unplaced\n";
    std::cout << "placed " << (result.poses.size() - result.unplaced.size()) << "/"
              << result.poses.size() << "\n";
    return 0;
  }

  if (cmd_graph->parsed()) {
    std::vector<SgcDescriptor> corpus;
    for (const std::string& path : gr.descriptor_files) {
      auto loaded = load_descriptors(path);
      for (SgcDescriptor& d : loaded) corpus.push_back(std::move(d));
    }
    require(static_cast<Index>(corpus.size()) > gr.k,
            "graph: need more descriptors than k (got " + std::to_string(corpus.size()) + ")");
    SaliencyParams params;
    params.k = gr.k;
    params.build_iterations = gr.build_iterations;
    params.seed = global.seed;
    const DescriptorGraph graph = build_graph(corpus, params, global.threads);
    save_graph(graph, gr.output);
    if (!gr.saliency_out.empty()) {
      std::ofstream out(gr.saliency_out + ".tmp");
      if (!out) fail(gr.saliency_out + ": cannot open for writing");
      out << "node,scan,indegree,saliency\n";
      out.precision(12);
      for (Index i = 0; i < graph.node_count(); ++i)
        out << i << "," << graph.scan_id_of(i) << "," << graph.indegree[std::size_t(i)] << ","
            << graph.saliency[std::size_t(i)] << "\n";
      out.close();
      std::error_code ec;
      std::filesystem::rename(gr.saliency_out + ".tmp", gr.saliency_out, ec);
      if (ec) fail(gr.saliency_out + ": rename failed: " + ec.message());
    }
    if (gr.oracle) {
      const DescriptorGraph exact = brute_force_knn(corpus, gr.k, global.threads);
      std::cout << "recall_vs_brute_force " << graph_recall(graph, exact) << "\n";
    }
    return 0;
  }

  if (cmd_eval->parsed()) {
    const Manifest manifest = Manifest::parse_file(ev.manifest);
    const auto written = run_eval_manifest(manifest, ev.out_dir, global.threads, global.verbose);
    for (const auto& path : written) std::cout << path.string() << "\n";
    return 0;
  }

  if (cmd_aug->parsed()) {
    PointCloud cloud = load_cloud(aug.input);
    const double pr = compute_resolution(cloud).pr;
    if (aug.downsample_fraction < 1.0)
      cloud = downsample(cloud, aug.downsample_fraction, global.seed);
    if (aug.noise_sigma_pr > 0.0)
      cloud = add_gaussian_noise(cloud, aug.noise_sigma_pr, global.seed + 1, pr);
    save_cloud(cloud, aug.output, format_from_path(aug.output, aug.ascii));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return main_impl(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "sgc: error: " << e.what() << "\n";
    return 1;
  }
}
