#include <doctest.h>

#include <bit>
#include <cmath>
#include <json.hpp>
#include <vector>

#include "hyperfill/validate.hpp"
#include "test_support.hpp"

using namespace hyperfill;

namespace {

const Spacing<2> h1 = Spacing<2>::constant(1.0);

/// Brute-force minimum number of removals that leaves no violating pair.
std::size_t exhaustive_min_removals(const std::vector<Point<2>>& pts, const Spacing<2>& s) {
  const std::size_t n = pts.size();
  std::size_t best = n;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      for (std::size_t j = i + 1; j < n && ok; ++j)
        if (!(mask >> i & 1) && !(mask >> j & 1) &&
            distance<2>(pts[i], pts[j]) < std::min(s.at(pts[i]), s.at(pts[j])) * (1 - spacing_tolerance))
          ok = false;
    if (ok) best = std::min<std::size_t>(best, static_cast<std::size_t>(std::popcount(mask)));
  }
  return best;
}

}  // namespace

TEST_CASE("spacing threshold is exact at h") {
  const std::vector<Point<2>> at_h{{0, 0}, {1, 0}};
  CHECK(check_spacing_all_pairs<2>(at_h, h1).violating_pairs.empty());
  CHECK(check_spacing_bucketed<2>(at_h, h1).violating_pairs.empty());
  const std::vector<Point<2>> close{{0, 0}, {0.99, 0}};
  const auto r = check_spacing_all_pairs<2>(close, h1);
  REQUIRE(r.violating_pairs.size() == 1u);
  CHECK(r.violating_pairs[0] == ViolatingPair{0, 1, 0.99});
  CHECK(r.min_pair_distance == 0.99);
  CHECK(check_spacing_bucketed<2>(close, h1).violating_pairs.size() == 1u);
}

TEST_CASE("variable spacing uses the smaller of the two values") {
  const auto s = Spacing<2>::radial_linear(0.25, 1.0, {0, 0}, 1.0);
  // h(0,0)=0.25, h(1,0)=1; distance 0.5 passes the min rule.
  const std::vector<Point<2>> pts{{0, 0}, {0.5, 0}};
  CHECK(check_spacing<2>(pts, s).violating_pairs.empty());
  const std::vector<Point<2>> bad{{0.9, 0}, {1.0, 0.0}};
  CHECK(check_spacing<2>(bad, s).violating_pairs.size() == 1u);
}

TEST_CASE("bucketed check equals all pairs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomStream rng(seed);
    const auto pts = hftest::uniform_points<2>(rng, hftest::cube<2>(0.0, 1.0), 1000);
    const auto s = seed % 2 ? Spacing<2>::constant(0.02) : Spacing<2>::radial_linear(0.01, 0.04, {0.5, 0.5}, 0.7);
    const auto a = check_spacing_all_pairs<2>(pts, s);
    const auto b = check_spacing_bucketed<2>(pts, s);
    CHECK(a.violating_pairs == b.violating_pairs);
    CHECK(a.min_pair_distance == b.min_pair_distance);
    CHECK(a.min_pair_distance == hftest::brute_min_distance<2>(pts));
  }
  RandomStream rng(99);
  const auto p3 = hftest::uniform_points<3>(rng, hftest::cube<3>(0.0, 1.0), 1000);
  const auto s3 = Spacing<3>::constant(0.06);
  CHECK(check_spacing_all_pairs<3>(p3, s3).violating_pairs == check_spacing_bucketed<3>(p3, s3).violating_pairs);
}

TEST_CASE("bucketed minimum distance for sparse sets") {
  const std::vector<Point<2>> pts{{0, 0}, {5, 0}, {5, 7}};
  const auto r = check_spacing_bucketed<2>(pts, Spacing<2>::constant(0.1));
  CHECK(r.min_pair_distance == 5.0);
  CHECK(check_spacing_bucketed<2>(std::vector<Point<2>>{{1, 1}}, h1).min_pair_distance == INFINITY);
}

TEST_CASE("coverage of a square lattice") {
  const double a = 0.05;
  const auto domain = Domain<2>::box({0, 0}, {1, 1});
  std::vector<Point<2>> pts;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) pts.push_back({i * a, j * a});
  RandomStream rng(4);
  const double gap = check_coverage<2>(domain, pts, Spacing<2>::constant(a), 20000, rng);
  CHECK(gap <= std::sqrt(2.0) / 2 + 1e-9);
  CHECK(gap > 0.6);
  const std::vector<Point<2>> one{{0.0, 0.0}};
  CHECK(check_coverage<2>(domain, one, Spacing<2>::constant(a), 1000, rng) > 10.0);
}

TEST_CASE("containment and combined report") {
  const auto disc = Domain<2>::disc({0, 0}, 1.0);
  const std::vector<Point<2>> pts{{0, 0}, {0.5, 0}, {1.1, 0}, {0, -2}};
  CHECK(count_containment_failures<2>(disc, pts) == 2u);
  RandomStream rng(1);
  const auto r = validate_points<2>(disc, pts, Spacing<2>::constant(0.4), 100, rng);
  CHECK(r.containment_failures == 2u);
  CHECK(r.violating_pairs.empty());
  CHECK_FALSE(r.ok());
  CHECK(std::isfinite(r.coverage_max_gap));
}

TEST_CASE("report JSON keys") {
  ValidationReport r;
  r.n_points = 2;
  r.violating_pairs.push_back({0, 1, 0.5});
  const auto j = nlohmann::json::parse(to_json(r));
  for (const char* k : {"n_points", "min_pair_distance", "violating_pairs", "coverage_max_gap", "containment_failures"})
    CHECK(j.contains(k));
  CHECK(j["min_pair_distance"].is_null());
  CHECK(j["coverage_max_gap"].is_null());
  CHECK(j["violating_pairs"][0][2].get<double>() == 0.5);
}

TEST_CASE("repair: no violations is a no-op") {
  const std::vector<Point<2>> pts{{0, 0}, {1, 0}, {0, 1}};
  const auto r = repair_proximity<2>(pts, h1);
  CHECK(r.removed == 0u);
  CHECK(r.points == pts);
  CHECK(r.min_violation_ratio == 1.0);
}

TEST_CASE("repair: single pair removes the later point") {
  const std::vector<Point<2>> pts{{0, 0}, {3, 0}, {0.5, 0}};
  const auto r = repair_proximity<2>(pts, h1);
  CHECK(r.removed == 1u);
  CHECK(r.kept == std::vector<std::size_t>{0, 1});
  CHECK(r.min_violation_ratio == doctest::Approx(0.5));
}

TEST_CASE("repair: chain keeps alternate points") {
  std::vector<Point<2>> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({0.6 * i, 0.0});
  const auto r = repair_proximity<2>(pts, h1);
  CHECK(r.kept == std::vector<std::size_t>{0, 2, 4});
  CHECK(r.removed == exhaustive_min_removals(pts, h1));
}

TEST_CASE("repair property: result is clean, idempotent and bounded") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RandomStream rng(seed);
    const auto n = static_cast<std::size_t>(2 + rng.below(11));
    const auto pts = hftest::uniform_points<2>(rng, hftest::cube<2>(0.0, 2.0), n);
    const auto r = repair_proximity<2>(pts, h1);
    CHECK(check_spacing_all_pairs<2>(r.points, h1).violating_pairs.empty());
    CHECK(r.points.size() + r.removed == n);
    CHECK(r.removed <= r.violating_pairs);
    CHECK(r.removed >= exhaustive_min_removals(pts, h1));
    for (std::size_t k = 0; k < r.kept.size(); ++k) CHECK(r.points[k] == pts[r.kept[k]]);
    const auto again = repair_proximity<2>(r.points, h1);
    CHECK(again.removed == 0u);
  }
}
