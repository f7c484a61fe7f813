#include "sgc/eval.hpp"
#include "sgc/lrf.hpp"
#include "sgc/synthetic.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace sgc;

namespace {

// Anisotropic bumpy patch centered on the origin; clear eigenvalue gaps.
PointCloud anisotropic_patch(std::uint64_t seed, Index nx = 31, Index ny = 21) {
  PointCloud patch = make_bumpy_surface(nx, ny, 1.0, 6, 1.5, 3.0, 6.0, seed);
  patch.normals.clear();
  return patch;
}

}  // namespace

TEST_CASE("extract_support") {
  const PointCloud grid = make_grid_cloud(21, 21, 1.0);
  const KdTree tree(grid.points);
  const Vec3 center = grid.point(10 * 21 + 10);  // grid middle

  SUBCASE("disk of radius 2.5 holds 21 lattice points") {
    const Support support = extract_support(grid, tree, center, 2.5);
    CHECK(support.point_indices.size() == 21);
    CHECK(support.point_indices == test::brute_force_radius(grid.points, center, 2.5));
  }
  SUBCASE("radius beyond the diameter holds everything") {
    const Support support = extract_support(grid, tree, center, 1000.0);
    CHECK(support.point_indices.size() == std::size_t(grid.size()));
  }
  SUBCASE("far-away center errors") {
    CHECK_THROWS_WITH_AS(extract_support(grid, tree, Vec3(500, 500, 500), 1.0),
                         doctest::Contains("empty support"), Error);
  }
}

TEST_CASE("compute_lrf on an anisotropic plane") {
  // Plane patch, longer in x: first axis ~x, third axis ~z.
  PointCloud plane;
  for (int i = -15; i <= 15; ++i)
    for (int j = -8; j <= 8; ++j) plane.points.emplace_back(double(i), double(j), 0.0);
  const KdTree tree(plane.points);
  const Support support = extract_support(plane, tree, Vec3::Zero(), 40.0);
  const LrfResult result = compute_lrf(plane, support);
  CHECK(!result.ambiguous);
  CHECK(result.lrf.is_valid());
  CHECK(std::abs(result.lrf.axes.row(0).dot(Vec3::UnitX())) >= std::cos(1e-3));
  CHECK(std::abs(result.lrf.axes.row(2).dot(Vec3::UnitZ())) >= std::cos(1e-3));
}

TEST_CASE("compute_lrf rotation covariance") {
  Rng rng(21);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud patch = anisotropic_patch(1000 + std::uint64_t(trial));
    const KdTree tree(patch.points);
    const Vec3 p = patch.point(patch.size() / 2);
    const Support support = extract_support(patch, tree, p, 9.0);
    if (support.point_indices.size() < 4) continue;
    const LrfResult base = compute_lrf(patch, support);
    if (base.ambiguous) continue;

    const RigidTransform motion = test::random_rigid(rng, 5.0);
    const PointCloud moved = apply_transform(patch, motion);
    const KdTree moved_tree(moved.points);
    const Support moved_support = extract_support(moved, moved_tree, motion.apply(p), 9.0);
    const LrfResult rotated = compute_lrf(moved, moved_support);
    if (rotated.ambiguous) continue;
    ++checked;

    CHECK(rotated.lrf.is_valid());
    for (int r = 0; r < 3; ++r) {
      const Vec3 expected = motion.rotation * base.lrf.axes.row(r).transpose();
      CHECK((rotated.lrf.axes.row(r).transpose() - expected).norm() <= 1e-6);
    }
  }
  CHECK(checked >= 90);  // ambiguity should be rare on these patches
}

TEST_CASE("compute_lrf normal disambiguation") {
  // Spherical cap around the north pole; outward normal at the center.
  PointCloud cap;
  Rng rng(5);
  for (int i = 0; i < 400; ++i) {
    Vec3 dir = rng.random_direction();
    dir.z() = std::abs(dir.z());
    if (dir.z() < 0.82) continue;
    cap.points.push_back(dir * 10.0);
  }
  REQUIRE(cap.size() >= 50);
  const KdTree tree(cap.points);
  const Vec3 top(0, 0, 10);
  const Support support = extract_support(cap, tree, top, 4.0);
  const Vec3 outward = Vec3::UnitZ();

  const LrfResult with_normal = compute_lrf(cap, support, outward);
  CHECK(with_normal.lrf.axes.row(2).dot(outward) > 0.0);
  CHECK(with_normal.lrf.is_valid());

  const LrfResult flipped = compute_lrf(cap, support, -outward);
  CHECK(flipped.lrf.axes.row(2).dot(outward) < 0.0);
  CHECK(flipped.lrf.is_valid());
}

TEST_CASE("compute_lrf repeatability under 0.1 pr noise") {
  // Rugged supports: sign statistics need geometric asymmetry to be stable,
  // which flat-ish patches cannot provide.
  int stable = 0, total = 0;
  for (int trial = 0; trial < 200; ++trial) {
    PointCloud patch = make_bumpy_surface(31, 31, 1.0, 12, 8.0, 2.5, 5.0,
                                          2000 + std::uint64_t(trial));
    patch.normals.clear();
    const KdTree tree(patch.points);
    const Vec3 p = patch.point(patch.size() / 2);
    const Support support = extract_support(patch, tree, p, 9.0);
    const LrfResult base = compute_lrf(patch, support);
    if (base.ambiguous) continue;

    const PointCloud noisy = add_gaussian_noise(patch, 0.1, 77 + std::uint64_t(trial), 1.0);
    const KdTree noisy_tree(noisy.points);
    const Support noisy_support = extract_support(noisy, noisy_tree, p, 9.0);
    const LrfResult redone = compute_lrf(noisy, noisy_support);
    if (redone.ambiguous) continue;

    ++total;
    if (test::max_axis_angle(base.lrf.axes, redone.lrf.axes) < 10.0 * M_PI / 180.0) ++stable;
  }
  REQUIRE(total >= 150);
  CHECK(double(stable) / double(total) >= 0.9);
}

TEST_CASE("compute_lrf degeneracy handling") {
  SUBCASE("isotropic disk is flagged ambiguous") {
    const PointCloud disk = make_disk_cloud(10.0, 1.0);
    const KdTree tree(disk.points);
    const Support support = extract_support(disk, tree, Vec3::Zero(), 20.0);
    CHECK(compute_lrf(disk, support).ambiguous);
  }
  SUBCASE("collinear support errors (rank < 2)") {
    PointCloud line;
    for (int i = 0; i < 10; ++i) line.points.emplace_back(double(i), 0.0, 0.0);
    const KdTree tree(line.points);
    const Support support = extract_support(line, tree, Vec3(4.5, 0, 0), 20.0);
    CHECK_THROWS_WITH_AS(compute_lrf(line, support), doctest::Contains("rank"), Error);
  }
  SUBCASE("fewer than 4 points errors") {
    PointCloud tiny;
    tiny.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    const KdTree tree(tiny.points);
    const Support support = extract_support(tiny, tree, Vec3(0, 0, 0), 5.0);
    CHECK_THROWS_AS(compute_lrf(tiny, support), Error);
  }
}
