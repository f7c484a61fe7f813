#include "sgc/eval.hpp"
#include "sgc/sampling.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <fstream>

using namespace sgc;

TEST_CASE("add_gaussian_noise") {
  const PointCloud grid = make_grid_cloud(100, 100, 1.0);

  SUBCASE("zero sigma is the identity") {
    const PointCloud same = add_gaussian_noise(grid, 0.0, 5);
    for (Index i = 0; i < grid.size(); ++i) CHECK(same.point(i) == grid.point(i));
  }
  SUBCASE("displacement std lands within 5% per axis") {
    const PointCloud noisy = add_gaussian_noise(grid, 0.5, 5, 1.0);
    for (int axis = 0; axis < 3; ++axis) {
      double sq = 0.0;
      for (Index i = 0; i < grid.size(); ++i) {
        const double d = noisy.point(i)[axis] - grid.point(i)[axis];
        sq += d * d;
      }
      const double std_dev = std::sqrt(sq / double(grid.size()));
      CHECK(std_dev == doctest::Approx(0.5).epsilon(0.05));
    }
  }
  SUBCASE("deterministic per seed") {
    const PointCloud a = add_gaussian_noise(grid, 0.3, 9, 1.0);
    const PointCloud b = add_gaussian_noise(grid, 0.3, 9, 1.0);
    for (Index i = 0; i < grid.size(); ++i) CHECK(a.point(i) == b.point(i));
  }
  SUBCASE("negative sigma errors") { CHECK_THROWS_AS(add_gaussian_noise(grid, -0.1, 0), Error); }
}

TEST_CASE("downsample") {
  PointCloud cloud = make_grid_cloud(40, 25, 1.0);  // 1000 points

  SUBCASE("fraction 1 keeps the cloud") {
    const PointCloud same = downsample(cloud, 1.0, 3);
    CHECK(same.size() == cloud.size());
  }
  SUBCASE("half of 1000 is exactly 500, all originals") {
    const PointCloud half = downsample(cloud, 0.5, 3);
    REQUIRE(half.size() == 500);
    const KdTree tree(cloud.points);
    for (Index i = 0; i < half.size(); ++i)
      CHECK(tree.nearest_distance_squared(half.point(i)) == 0.0);
  }
  SUBCASE("deterministic per seed") {
    const PointCloud a = downsample(cloud, 0.25, 11);
    const PointCloud b = downsample(cloud, 0.25, 11);
    REQUIRE(a.size() == b.size());
    for (Index i = 0; i < a.size(); ++i) CHECK(a.point(i) == b.point(i));
  }
  SUBCASE("bad fraction errors") {
    CHECK_THROWS_AS(downsample(cloud, 0.0, 0), Error);
    CHECK_THROWS_AS(downsample(cloud, 1.5, 0), Error);
  }
}

TEST_CASE("boundary detection and distance") {
  SUBCASE("disk center is one radius from the boundary") {
    const PointCloud disk = make_disk_cloud(15.0, 1.0);
    const KdTree tree(disk.points);
    const BoundaryInfo info = detect_boundary(disk, tree, 1.0);
    CHECK(!info.boundary_points.empty());
    const double center_dist = boundary_distance(disk, info, Vec3::Zero(), 100.0);
    CHECK(center_dist == doctest::Approx(15.0).epsilon(0.15));
    // A rim point touches the boundary.
    Vec3 rim(15.0, 0.0, 0.0);
    while (tree.nearest_distance_squared(rim) > 0.0) rim.x() -= 1.0;
    CHECK(boundary_distance(disk, info, rim, 100.0) <= 2.0);
  }
  SUBCASE("a closed surface has no boundary anywhere") {
    const PointCloud sphere = make_sphere_cloud(2500, 12.0, 8);
    const KdTree tree(sphere.points);
    const BoundaryInfo info = detect_boundary(sphere, tree);
    CHECK(info.boundary_points.empty());
    for (Index i = 0; i < sphere.size(); i += 97)
      CHECK(boundary_distance(sphere, info, sphere.point(i), 1000.0) == kInfinity);
  }
  SUBCASE("distances beyond the probe radius report infinity") {
    const PointCloud disk = make_disk_cloud(15.0, 1.0);
    const KdTree tree(disk.points);
    const BoundaryInfo info = detect_boundary(disk, tree, 1.0);
    CHECK(boundary_distance(disk, info, Vec3::Zero(), 5.0) == kInfinity);
  }
  SUBCASE("tiny clouds error") {
    PointCloud tiny;
    tiny.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    const KdTree tree(tiny.points);
    CHECK_THROWS_AS(detect_boundary(tiny, tree, 1.0), Error);
  }
}

TEST_CASE("make_scene") {
  const PointCloud model_a = test::standard_surface(200, 25, 25);
  const PointCloud model_b = test::standard_surface(201, 25, 25);

  SUBCASE("identity placement reproduces the model") {
    const std::vector<PointCloud> models{model_a};
    const std::vector<RigidTransform> transforms{RigidTransform::identity()};
    const Scene scene = make_scene(models, transforms, 2.0);
    REQUIRE(scene.cloud.size() == model_a.size());
    for (Index i = 0; i < model_a.size(); ++i) CHECK(scene.cloud.point(i) == model_a.point(i));
  }
  SUBCASE("two models with known offsets round trip") {
    Rng rng(33);
    const std::vector<PointCloud> models{model_a, model_b};
    const std::vector<RigidTransform> transforms{test::random_rigid(rng, 10.0),
                                                 test::random_rigid(rng, 10.0)};
    const Scene scene = make_scene(models, transforms, 2.0);
    CHECK(scene.cloud.size() == model_a.size() + model_b.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto [begin, end] = scene.ground_truth.ranges[m];
      const RigidTransform inv = scene.ground_truth.transforms[m].inverse();
      for (Index i = begin; i < end; ++i) {
        const Vec3 back = inv.apply(scene.cloud.point(i));
        CHECK((back - models[m].point(i - begin)).norm() <= 1e-9);
      }
    }
  }
  SUBCASE("seeded scene is reproducible and covers three models") {
    const std::vector<PointCloud> models{model_a, model_b, model_a};
    const Scene a = make_scene(models, std::uint64_t(5), 2.0);
    const Scene b = make_scene(models, std::uint64_t(5), 2.0);
    REQUIRE(a.cloud.size() == b.cloud.size());
    for (Index i = 0; i < a.cloud.size(); ++i) CHECK(a.cloud.point(i) == b.cloud.point(i));
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto [begin, end] = a.ground_truth.ranges[m];
      const RigidTransform inv = a.ground_truth.transforms[m].inverse();
      for (Index i = begin; i < end; i += 50)
        CHECK((inv.apply(a.cloud.point(i)) - models[m].point(i - begin)).norm() <= 1e-9);
    }
  }
}

namespace {

// Model features + scene features for a one-model scene; the scene features
// are the ground-truth correspondents of the model features.
RpInputs build_rp_inputs(const PointCloud& model, const Scene& scene, Index features,
                         std::uint64_t seed, const SgcParams& params) {
  RpInputs inputs;
  const KdTree model_tree(model.points);
  const auto picks = random_sample(model, features, seed);
  auto batch = describe_cloud(model, model_tree, picks, params);
  for (SgcDescriptor& d : batch.descriptors) {
    inputs.model_points.push_back(d.feature_point());
    inputs.model_of.push_back(0);
    inputs.model_descriptors.push_back(std::move(d));
  }
  const KdTree scene_tree(scene.cloud.points);
  std::vector<Index> scene_picks;
  for (const Vec3& p : inputs.model_points)
    scene_picks.push_back(scene_tree.nearest_one(scene.ground_truth.transforms[0].apply(p)));
  auto scene_batch = describe_cloud(scene.cloud, scene_tree, scene_picks, params);
  for (SgcDescriptor& d : scene_batch.descriptors) {
    inputs.scene_points.push_back(d.feature_point());
    inputs.scene_descriptors.push_back(std::move(d));
  }
  return inputs;
}

}  // namespace

TEST_CASE("rp_curve") {
  const PointCloud model = test::standard_surface(300, 60, 60);
  Rng rng(40);
  const std::vector<PointCloud> models{model};
  const std::vector<RigidTransform> transforms{test::random_rigid(rng, 15.0)};
  const Scene scene = make_scene(models, transforms, 2.0);
  const SgcParams params = SgcParams::from_resolution(1.0, 10.0, 1.0, 8);
  const RpInputs inputs = build_rp_inputs(model, scene, 150, 9, params);

  const RpCurve curve = rp_curve(inputs, scene.ground_truth, {});
  REQUIRE(!curve.thresholds.empty());

  SUBCASE("noise-free self scene matches nearly perfectly at the loosest threshold") {
    CHECK(curve.precision.front() > 0.95);
    CHECK(curve.recall.front() > 0.95);
  }
  SUBCASE("a threshold above all scores declares nothing") {
    CHECK(curve.precision.back() == 1.0);
    CHECK(curve.recall.back() == 0.0);
  }
  SUBCASE("recall never rises as the threshold tightens") {
    for (std::size_t i = 1; i < curve.recall.size(); ++i)
      CHECK(curve.recall[i] <= curve.recall[i - 1] + 1e-12);
  }
  SUBCASE("shuffled pairings collapse precision") {
    RpInputs shuffled = inputs;
    std::rotate(shuffled.scene_points.begin(), shuffled.scene_points.begin() + 31,
                shuffled.scene_points.end());
    const RpCurve bad = rp_curve(shuffled, scene.ground_truth, {});
    CHECK(bad.precision.front() < 0.2);
  }
  SUBCASE("heavier downsampling never helps recall") {
    const auto recall_under_downsampling = [&](double fraction) {
      const PointCloud sparse = downsample(scene.cloud, fraction, 55);
      const KdTree sparse_tree(sparse.points);
      RpInputs ds = inputs;
      ds.scene_descriptors.clear();
      ds.scene_points.clear();
      std::vector<Index> picks;
      for (const Vec3& p : inputs.model_points)
        picks.push_back(sparse_tree.nearest_one(scene.ground_truth.transforms[0].apply(p)));
      auto batch = describe_cloud(sparse, sparse_tree, picks, params);
      for (SgcDescriptor& d : batch.descriptors) {
        ds.scene_points.push_back(d.feature_point());
        ds.scene_descriptors.push_back(std::move(d));
      }
      return recall_at_precision(rp_curve(ds, scene.ground_truth, {}), 0.8);
    };
    const double at_half = recall_under_downsampling(0.5);
    const double at_eighth = recall_under_downsampling(0.125);
    CHECK(at_eighth <= at_half + 0.05);
  }
  SUBCASE("empty ground truth errors") {
    GroundTruth empty;
    empty.tolerance = 2.0;
    CHECK_THROWS_AS(rp_curve(inputs, empty, {}), Error);
  }
}

TEST_CASE("cmc_curve") {
  const PointCloud model = test::standard_surface(310, 60, 60);
  const KdTree tree(model.points);
  const SgcParams params = SgcParams::from_resolution(1.0, 8.0, 1.0, 8);
  // Uniformly spread features keep the indegree distribution tame; clumped
  // features would starve some nodes of in-edges and make them unreachable.
  const auto picks = uniform_sample(model, tree, 300, 2);
  auto batch = describe_cloud(model, tree, picks, params);
  const std::vector<SgcDescriptor>& corpus = batch.descriptors;
  REQUIRE(corpus.size() >= 200);

  SaliencyParams gp;
  gp.k = 8;
  gp.seed = 6;
  // Wider search budget than the desk-scale defaults, as the corpus is small.
  gp.query_seeds = 32;
  gp.query_iterations = 6;
  gp.query_beam = 12;
  gp.query_pool = 48;
  gp.rerank = false;  // exact-copy ranking is judged on the raw score
  const DescriptorGraph graph = build_graph(corpus, gp);

  std::vector<CmcQuery> queries;
  for (Index i = 0; i < 50; ++i) {
    const Index node = (i * 5) % Index(corpus.size());
    queries.push_back({corpus[std::size_t(node)], node});
  }

  const CmcCurve exhaustive = cmc_curve(graph, corpus, queries, 10, CmcMode::Exhaustive, gp);
  CHECK(exhaustive.hit_rate[0] == 1.0);  // exact copies match themselves first

  const CmcCurve graph_mode = cmc_curve(graph, corpus, queries, 10, CmcMode::Graph, gp);
  CHECK(graph_mode.hit_rate[0] >= 0.9);
  for (std::size_t n = 1; n < graph_mode.hit_rate.size(); ++n) {
    CHECK(graph_mode.hit_rate[n] >= graph_mode.hit_rate[n - 1]);  // monotone
    CHECK(exhaustive.hit_rate[n] >= exhaustive.hit_rate[n - 1]);
  }
  CHECK(exhaustive.hit_rate.back() <= 1.0);
  // The exact search dominates the approximation at every rank.
  for (std::size_t n = 0; n < graph_mode.hit_rate.size(); ++n)
    CHECK(exhaustive.hit_rate[n] >= graph_mode.hit_rate[n] - 0.02);

  SUBCASE("a query whose correspondent is missing errors") {
    std::vector<CmcQuery> bad{{corpus[0], Index(corpus.size())}};
    CHECK_THROWS_AS(cmc_curve(graph, corpus, bad, 5, CmcMode::Graph, gp), Error);
  }
}

TEST_CASE("curve files and manifests") {
  test::TempDir dir;

  SUBCASE("rp csv layout") {
    RpCurve curve;
    curve.thresholds = {0.5, 1.5};
    curve.precision = {0.75, 1.0};
    curve.recall = {0.5, 0.0};
    write_rp_curve(curve, dir.file("c.csv"), dir.file("c.dat"));
    std::ifstream in(dir.file("c.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "threshold,precision,recall");
    std::getline(in, line);
    CHECK(line == "0.5,0.75,0.5");
  }

  SUBCASE("manifest parsing") {
    const Manifest m = Manifest::parse_text(
        "# config\nmodels = a.ply, b.ply\nseed = 7\nnoise_sigmas_pr = 0.1, 0.3 # inline\n");
    CHECK(m.get_list("models") == std::vector<std::string>{"a.ply", "b.ply"});
    CHECK(m.get_index("seed", 0) == 7);
    const double fallback[] = {0.0};
    CHECK(m.get_double_list("noise_sigmas_pr", fallback) == std::vector<double>{0.1, 0.3});
    CHECK(m.get_double("missing", 2.5) == 2.5);
    CHECK_THROWS_AS(Manifest::parse_text("not a key value line\n"), Error);
  }

  SUBCASE("missing model file is named in the error") {
    const Manifest m = Manifest::parse_text("models = /no/such/model.ply\n");
    CHECK_THROWS_WITH_AS(run_eval_manifest(m, dir.path()),
                         doctest::Contains("/no/such/model.ply"), Error);
  }
}
