#include <doctest.h>

#include <algorithm>
#include <set>
#include <thread>
#include <vector>

#include "hyperfill/spatial_index.hpp"
#include "hyperfill/work_tree.hpp"
#include "test_support.hpp"

using namespace hyperfill;
using hftest::cube;

namespace {

template <int D>
void check_ball_queries(std::uint64_t seed, int work_depth, int leaf_capacity) {
  RandomStream rng(seed);
  const Box<D> root = cube<D>(-1.0, 1.0);
  SpatialTree<D> tree(root, work_depth, {leaf_capacity, 20, false});
  const auto pts = hftest::uniform_points<D>(rng, root, 1000);
  for (const auto& p : pts) tree.insert(p);
  REQUIRE(tree.count() == pts.size());
  for (int q = 0; q < 1000; ++q) {
    const Point<D> c = hftest::uniform_point<D>(rng, cube<D>(-1.2, 1.2));
    const double r = rng.uniform(0.0, 0.3);
    REQUIRE(tree.has_point_within(c, r) == hftest::brute_has_point_within<D>(pts, c, r));
  }
  // Radius equal to an exact stored distance: strict inequality excludes it.
  for (int q = 0; q < 200; ++q) {
    const Point<D> c = hftest::uniform_point<D>(rng, root);
    const auto& p = pts[rng.below(pts.size())];
    const double r = distance<D>(c, p);
    CHECK(tree.has_point_within(c, r) == hftest::brute_has_point_within<D>(pts, c, r));
  }
}

}  // namespace

TEST_CASE("ball query matches brute force") {
  check_ball_queries<2>(1, 0, 40);
  check_ball_queries<2>(2, 3, 40);
  check_ball_queries<2>(3, 2, 1);
  check_ball_queries<3>(4, 2, 40);
  check_ball_queries<3>(5, 1, 3);
}

TEST_CASE("leaves partition the stored points") {
  RandomStream rng(7);
  const Box<2> root = cube<2>(0.0, 1.0);
  SpatialTree<2> tree(root, 2, {5, 20, false});
  const auto pts = hftest::uniform_points<2>(rng, root, 3000);
  for (const auto& p : pts) tree.insert(p);
  std::vector<int> seen(pts.size(), 0);
  std::size_t total = 0;
  tree.for_each_leaf([&](std::int32_t, const auto& node) {
    const auto ids = tree.leaf_points(node);
    CHECK(ids.size() <= 5u);
    total += ids.size();
    for (std::size_t i : ids) {
      ++seen[i];
      CHECK(node.box.contains_closed(tree.point(i)));
    }
  });
  CHECK(total == pts.size());
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(tree.point(i) == pts[i]);
}

TEST_CASE("work cell cross-links enumerate exactly the points of the cell") {
  RandomStream rng(12);
  const auto domain = Domain<2>::box({0, 0}, {1, 1});
  const auto work = WorkTree<2>::build(domain, Spacing<2>::constant(0.05), 25);
  REQUIRE(work->depth() == 2);
  SpatialTree<2> tree(domain.bounding_box(), work->depth(), {4, 20, false});
  work->link_spatial(tree);
  const auto pts = hftest::uniform_points<2>(rng, domain.bounding_box(), 2000);
  std::vector<std::int32_t> cell_of(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto ins = tree.insert(pts[i]);
    CHECK(ins.point_index == i);
    CHECK(ins.work_cell == tree.locate_cell(pts[i]));
    CHECK(ins.work_cell == work->cell_of(pts[i]));
    CHECK(work->cell_box(ins.work_cell).contains_closed(pts[i]));
    cell_of[i] = ins.work_cell;
  }
  for (std::int32_t c = 0; c < static_cast<std::int32_t>(work->size()); ++c) {
    std::set<std::size_t> got;
    tree.for_each_point_under(work->cell(c).spatial_node, [&](std::size_t i) { got.insert(i); });
    std::set<std::size_t> want;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (cell_of[i] == c) want.insert(i);
    CHECK(got == want);
  }
}

TEST_CASE("points on cell boundaries agree between trees") {
  const auto domain = Domain<2>::box({-0.3, 0.1}, {0.7, 1.9});
  const auto work = WorkTree<2>::build(domain, Spacing<2>::constant(0.01), 50);
  SpatialTree<2> tree(domain.bounding_box(), work->depth(), {40, 20, false});
  const Box<2>& root = domain.bounding_box();
  const std::uint64_t n = work->cells_per_axis();
  for (std::uint64_t i = 0; i <= n; ++i)
    for (std::uint64_t j = 0; j <= n; j += 3) {
      const Point<2> p{subdivision_coordinate(root.lo[0], root.hi[0], work->depth(), i),
                       subdivision_coordinate(root.lo[1], root.hi[1], work->depth(), j)};
      const auto ins = tree.insert(p);
      CHECK(work->cell_box(ins.work_cell).contains_closed(p));
      CHECK(ins.work_cell == work->cell_of(p));
    }
}

TEST_CASE("insert outside the root box throws") {
  SpatialTree<2> tree(cube<2>(0.0, 1.0), 1);
  CHECK_THROWS_AS(tree.insert({1.5, 0.5}), std::out_of_range);
  CHECK_NOTHROW(tree.insert({1.0, 1.0}));
}

TEST_CASE("coincident points exhaust the depth limit") {
  SpatialTree<2> tree(cube<2>(0.0, 1.0), 1, {1, 6, false});
  tree.insert({0.3, 0.3});
  CHECK_THROWS_AS(tree.insert({0.3, 0.3}), DepthLimitError);
  CHECK_THROWS_AS(SpatialTree<2>(cube<2>(0.0, 1.0), 6, {40, 6, false}), DepthLimitError);
}

TEST_CASE("concurrent inserts into separated cells") {
  const auto domain = Domain<2>::box({0, 0}, {1, 1});
  const auto work = WorkTree<2>::build(domain, Spacing<2>::constant(0.005), 400);
  REQUIRE(work->cells_per_axis() >= 4u);
  SpatialTree<2> tree(domain.bounding_box(), work->depth(), {8, 20, true});
  // Four threads, each confined to one quadrant-corner cell far from the others.
  const std::uint32_t last = work->cells_per_axis() - 1;
  const GridCoords<2> corners[] = {{0, 0}, {last, 0}, {0, last}, {last, last}};
  constexpr int per = 5000;
  std::vector<std::vector<Point<2>>> mine(4);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t)
      pool.emplace_back([&, t] {
        RandomStream rng(100, static_cast<std::uint64_t>(t));
        const Box<2> b = work->cell_box(work->index(corners[t]));
        for (int k = 0; k < per; ++k) {
          const Point<2> p = hftest::uniform_point<2>(rng, b);
          tree.insert(p, t);
          mine[static_cast<std::size_t>(t)].push_back(p);
        }
      });
  }
  CHECK(tree.count() == 4u * per);
  CHECK(tree.writer_overlaps() == 0u);
  std::size_t total = 0;
  tree.for_each_leaf([&](std::int32_t, const auto& node) { total += tree.leaf_points(node).size(); });
  CHECK(total == 4u * per);
  for (const auto& v : mine)
    for (std::size_t k = 0; k < v.size(); k += 97) CHECK(tree.has_point_within(v[k], 1e-12));
}
