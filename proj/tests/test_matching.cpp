#include "sgc/eval.hpp"
#include "sgc/registration.hpp"
#include "sgc/synthetic.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <fstream>

using namespace sgc;

TEST_CASE("transform_from_lrfs") {
  Rng rng(8);
  SUBCASE("identical frames give the identity") {
    Lrf frame;
    frame.origin = Vec3(1, 2, 3);
    frame.axes = rng.random_rotation();
    const RigidTransform t = transform_from_lrfs(frame, frame);
    CHECK((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(t.translation.norm() <= 1e-12);
  }
  SUBCASE("a known rotation between frames is recovered") {
    Lrf d;
    d.axes = rng.random_rotation();
    const Mat3 q = rng.random_rotation();
    Lrf r = d;
    r.axes = d.axes * q.transpose();  // axes rows rotated by q
    const RigidTransform t = transform_from_lrfs(d, r);
    CHECK((t.rotation - q).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("axis endpoints map onto each other") {
    for (int trial = 0; trial < 20; ++trial) {
      Lrf d, r;
      d.origin = rng.gaussian3(4.0);
      d.axes = rng.random_rotation();
      r.origin = rng.gaussian3(4.0);
      r.axes = rng.random_rotation();
      const RigidTransform t = transform_from_lrfs(d, r);
      CHECK(t.is_valid(1e-9));
      CHECK((t.apply(d.origin) - r.origin).norm() <= 1e-9);
      for (int axis = 0; axis < 3; ++axis) {
        const Vec3 mapped = t.apply(d.origin + d.axes.row(axis).transpose());
        CHECK((mapped - (r.origin + r.axes.row(axis).transpose())).norm() <= 1e-9);
      }
    }
  }
  SUBCASE("composition consistency") {
    for (int trial = 0; trial < 20; ++trial) {
      Lrf a, b, c;
      for (Lrf* f : {&a, &b, &c}) {
        f->origin = rng.gaussian3(3.0);
        f->axes = rng.random_rotation();
      }
      const RigidTransform ac = transform_from_lrfs(a, c);
      const RigidTransform chained = transform_from_lrfs(b, c).compose(transform_from_lrfs(a, b));
      CHECK((ac.rotation - chained.rotation).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((ac.translation - chained.translation).norm() <= 1e-9);
    }
  }
}

TEST_CASE("overlap_ratio") {
  SUBCASE("cloud against itself is 1") {
    const PointCloud grid = make_grid_cloud(20, 20, 1.0);
    const KdTree tree(grid.points);
    CHECK(overlap_ratio(grid, grid, tree, RigidTransform::identity(), 0.5) == 1.0);
  }
  SUBCASE("distant clouds do not overlap") {
    const PointCloud grid = make_grid_cloud(10, 10, 1.0);
    const KdTree tree(grid.points);
    RigidTransform t;
    t.translation = Vec3(1000, 0, 0);
    CHECK(overlap_ratio(grid, grid, tree, t, 2.0) == 0.0);
  }
  SUBCASE("half-shifted grids overlap by half") {
    const PointCloud grid = make_grid_cloud(40, 40, 1.0);
    const KdTree tree(grid.points);
    RigidTransform t;
    t.translation = Vec3(20, 0, 0);
    const double ratio = overlap_ratio(grid, grid, tree, t, 0.4);
    CHECK(ratio == doctest::Approx(0.5).epsilon(40.0 / 1600.0));  // one column's slack
  }
  SUBCASE("invariant under conjugation by a rigid motion") {
    Rng rng(6);
    const PointCloud a = test::standard_surface(100, 30, 30);
    PointCloud b = test::standard_surface(101, 30, 30);
    const KdTree tree_b(b.points);
    const RigidTransform t = test::random_rigid(rng, 3.0);
    const double base = overlap_ratio(a, b, tree_b, t, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
      const RigidTransform g = test::random_rigid(rng, 5.0);
      const PointCloud ga = apply_transform(a, g);
      const PointCloud gb = apply_transform(b, g);
      const KdTree tree_gb(gb.points);
      const RigidTransform conjugated = g.compose(t).compose(g.inverse());
      CHECK(overlap_ratio(ga, gb, tree_gb, conjugated, 2.0) ==
            doctest::Approx(base).epsilon(1e-9));
    }
  }
}

TEST_CASE("icp_refine") {
  const PointCloud cloud = test::standard_surface(55, 50, 50);
  const KdTree tree(cloud.points);

  SUBCASE("small perturbation converges to the identity") {
    RigidTransform t0;
    t0.rotation = axis_angle_rotation(Vec3(0.3, 1.0, 0.2), 1.0 * M_PI / 180.0);
    t0.translation = Vec3(0.3, -0.3, 0.2);  // ~0.5 pr
    const IcpResult icp = icp_refine(cloud, cloud, tree, t0, 50, 2.0);
    CHECK(rotation_angle_between(icp.transform.rotation, Mat3::Identity()) <= 1e-4);
    CHECK(icp.transform.translation.norm() <= 0.01);
    for (std::size_t i = 1; i < icp.rms_trace.size(); ++i)
      CHECK(icp.rms_trace[i] <= icp.rms_trace[i - 1]);
  }
  SUBCASE("an exact start terminates after one iteration") {
    const IcpResult icp = icp_refine(cloud, cloud, tree, RigidTransform::identity(), 50, 2.0);
    CHECK(icp.iterations == 1);
    CHECK(icp.converged);
    CHECK((icp.transform.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(icp.transform.translation.norm() <= 1e-9);
  }
  SUBCASE("disjoint clouds error out") {
    PointCloud far = cloud;
    for (Vec3& p : far.points) p += Vec3(1000, 0, 0);
    CHECK_THROWS_WITH_AS(icp_refine(far, cloud, tree, RigidTransform::identity(), 10, 2.0),
                         doctest::Contains("correspondences"), Error);
  }
}

TEST_CASE("register_pair") {
  RegisterConfig config;
  config.feature_count = 400;
  config.seed = 7;

  SUBCASE("a scan registers to itself at the identity") {
    const PointCloud scan = test::standard_surface(60, 60, 60);
    const RegistrationResult result = register_pair(scan, scan, config);
    REQUIRE(result.found);
    CHECK(result.overlap >= 0.99);
    CHECK(rotation_angle_between(result.transform.rotation, Mat3::Identity()) <= 1e-6);
    CHECK(result.transform.translation.norm() <= 1e-6);
    CHECK(result.candidates_tried <= 5);
  }

  SUBCASE("two noisy views recover the ground truth") {
    const PointCloud surface = test::standard_surface(61, 90, 60);
    // 50% of each view overlaps the other.
    PointCloud view_r = crop_halfspace(surface, Vec3::UnitX(), 15.0);
    PointCloud view_d = crop_halfspace(surface, -Vec3::UnitX(), 15.0);
    view_r.id = "ref";
    view_d.id = "data";
    Rng rng(19);
    const RigidTransform gt = test::random_rigid(rng, 8.0);
    PointCloud moved = apply_transform(view_d, gt.inverse());  // data frame
    moved = add_gaussian_noise(moved, 0.3, 3, 1.0);
    view_r = add_gaussian_noise(view_r, 0.3, 4, 1.0);

    const RegistrationResult result = register_pair(moved, view_r, config);
    REQUIRE(result.found);
    CHECK(rotation_angle_between(result.pre_icp_transform.rotation, gt.rotation) <=
          5.0 * M_PI / 180.0);
    CHECK((result.pre_icp_transform.translation - gt.translation).norm() <= 3.0);
    CHECK(rotation_angle_between(result.transform.rotation, gt.rotation) <= 1.0 * M_PI / 180.0);
    CHECK((result.transform.translation - gt.translation).norm() <= 1.0);
  }

  SUBCASE("an impossible absolute threshold yields a no-match result") {
    const PointCloud a = test::standard_surface(62, 40, 40);
    const PointCloud b = test::standard_surface(63, 40, 40);
    RegisterConfig strict = config;
    strict.absolute_threshold = 1e12;
    const RegistrationResult result = register_pair(a, b, strict);
    CHECK(!result.found);
    CHECK(result.candidates.empty());
  }

  SUBCASE("swapped arguments give mutually inverse transforms") {
    const PointCloud surface = test::standard_surface(64, 80, 50);
    PointCloud left = crop_halfspace(surface, Vec3::UnitX(), 12.0);
    PointCloud right = crop_halfspace(surface, -Vec3::UnitX(), 12.0);
    Rng swap_rng(77);
    right = apply_transform(right, test::random_rigid(swap_rng, 5.0));
    const RegistrationResult fwd = register_pair(left, right, config);
    const RegistrationResult bwd = register_pair(right, left, config);
    REQUIRE(fwd.found);
    REQUIRE(bwd.found);
    const RigidTransform round = fwd.transform.compose(bwd.transform);
    CHECK(rotation_angle_between(round.rotation, Mat3::Identity()) <= 5.0 * M_PI / 180.0);
    CHECK(round.translation.norm() <= 2.0);
  }
}

TEST_CASE("registration report") {
  test::TempDir dir;
  const PointCloud scan = test::standard_surface(70, 40, 40);
  RegisterConfig config;
  config.feature_count = 120;
  const RegistrationResult result = register_pair(scan, scan, config);
  const auto path = dir.file("report.txt");
  write_registration_report(result, "a", "b", path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("match_found: true") != std::string::npos);
  CHECK(text.find("transform_row_major:") != std::string::npos);
  CHECK(text.find("icp_trace:") != std::string::npos);
}

TEST_CASE("reconstruct") {
  ReconstructConfig config;
  config.pairwise.feature_count = 200;
  config.pairwise.seed = 3;
  config.graph.k = 10;
  config.graph.seed = 3;

  SUBCASE("three displaced copies snap back together") {
    const PointCloud base = test::standard_surface(80, 50, 50);
    Rng rng(14);
    std::vector<RigidTransform> offsets{RigidTransform::identity(),
                                        test::random_rigid(rng, 6.0),
                                        test::random_rigid(rng, 6.0)};
    std::vector<PointCloud> scans;
    for (std::size_t s = 0; s < offsets.size(); ++s) {
      PointCloud scan = apply_transform(base, offsets[s]);
      scan.id = "copy" + std::to_string(s);
      scans.push_back(std::move(scan));
    }
    const ReconstructionResult result = reconstruct(scans, config);
    CHECK(result.unplaced.empty());
    // Every pair of recovered poses must agree with the ground-truth relative
    // motion: pose_i o offset_i is common across scans.
    const Index ref = result.reference_scan;
    for (std::size_t s = 0; s < scans.size(); ++s) {
      REQUIRE(result.poses[s].placed);
      const RigidTransform recovered =
          result.poses[s].transform.compose(offsets[s]).compose(
              offsets[std::size_t(ref)].inverse());
      CHECK(rotation_angle_between(recovered.rotation, Mat3::Identity()) <= 1.0 * M_PI / 180.0);
      CHECK(recovered.translation.norm() <= 1.0);
    }
    // Deduplication collapses the three aligned copies.
    CHECK(result.merged.size() <= Index(double(base.size()) * 1.3));
    CHECK(result.merged.size() >= Index(double(base.size()) * 0.7));
  }

  SUBCASE("an unmatchable scan is reported unplaced") {
    // A plane patch and a sphere share no alignable structure; any candidate
    // transform leaves the overlap under the acceptance threshold.
    std::vector<PointCloud> scans;
    scans.push_back(test::standard_surface(81, 40, 40));
    PointCloud far = make_bumpy_sphere(2500, 12.0, 10, 0.05, 82);
    for (Vec3& p : far.points) p += Vec3(5000, 0, 0);
    far.id = "far";
    scans.push_back(std::move(far));
    ReconstructConfig strict = config;
    strict.min_overlap = 0.3;
    const ReconstructionResult result = reconstruct(scans, strict);
    REQUIRE(result.unplaced.size() == 1);
    CHECK(!result.poses[std::size_t(result.unplaced[0])].placed);
  }
}
