#include "sgc/kd_tree.hpp"
#include "sgc/synthetic.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace sgc;

TEST_CASE("radius_query basics") {
  const PointCloud grid = make_grid_cloud(10, 10, 1.0);
  const KdTree tree(grid.points);

  SUBCASE("radius below spacing isolates a point") {
    const auto hits = tree.radius_query(grid.point(34), 0.4);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0] == 34);
  }
  SUBCASE("radius covering the cloud returns everything") {
    const auto hits = tree.radius_query(Vec3::Zero(), 100.0);
    CHECK(hits.size() == std::size_t(grid.size()));
  }
  SUBCASE("non-positive radius errors") {
    CHECK_THROWS_AS(tree.radius_query(Vec3::Zero(), 0.0), Error);
  }
}

TEST_CASE("nearest_query basics") {
  const PointCloud grid = make_grid_cloud(7, 7, 1.0);
  const KdTree tree(grid.points);

  SUBCASE("k=1 at a cloud point returns it") {
    CHECK(tree.nearest_query(grid.point(11), 1) == std::vector<Index>{11});
  }
  SUBCASE("k=n returns everything, ordered like the oracle") {
    const Vec3 q(0.3, -0.7, 0.2);
    CHECK(tree.nearest_query(q, grid.size()) ==
          test::brute_force_nearest(grid.points, q, grid.size()));
  }
  SUBCASE("equidistant ties go to the lower index") {
    // Center of the 7x7 grid: four lattice neighbors at distance 1.
    const Vec3 center = grid.point(24);
    const auto hits = tree.nearest_query(center, 5);
    CHECK(hits == test::brute_force_nearest(grid.points, center, 5));
    CHECK(hits[0] == 24);
    CHECK(hits[1] == 17);  // the smallest index among the distance-1 ring
  }
  SUBCASE("k out of range errors") {
    CHECK_THROWS_AS(tree.nearest_query(Vec3::Zero(), 0), Error);
    CHECK_THROWS_AS(tree.nearest_query(Vec3::Zero(), grid.size() + 1), Error);
  }
}

TEST_CASE("queries agree with brute force on random instances") {
  Rng rng(99);
  std::vector<Vec3> points;
  for (int i = 0; i < 600; ++i) points.push_back(rng.gaussian3(2.0));
  // Duplicates and collinear runs to exercise ties.
  for (int i = 0; i < 20; ++i) points.push_back(points[std::size_t(i)]);
  for (int i = 0; i < 20; ++i) points.emplace_back(double(i) * 0.25, 0.0, 0.0);
  const KdTree tree(points);

  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 q = rng.gaussian3(2.5);
    const double radius = 0.2 + rng.uniform() * 3.0;
    CHECK(tree.radius_query(q, radius) == test::brute_force_radius(points, q, radius));
    const Index k = 1 + Index(rng.uniform_index(40));
    CHECK(tree.nearest_query(q, k) == test::brute_force_nearest(points, q, k));
  }
}
