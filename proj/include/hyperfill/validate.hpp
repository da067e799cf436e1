#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "hyperfill/geometry.hpp"
#include "hyperfill/random.hpp"

namespace hyperfill {

struct ViolatingPair {
  std::size_t first;
  std::size_t second;
  double distance;

  friend bool operator==(const ViolatingPair&, const ViolatingPair&) = default;
};

struct ValidationReport {
  std::size_t n_points = 0;
  /// Smallest distance over all pairs; infinity with fewer than two points.
  double min_pair_distance = std::numeric_limits<double>::infinity();
  std::vector<ViolatingPair> violating_pairs;
  /// Max over samples of (distance to nearest point) / h; NaN when not measured.
  double coverage_max_gap = std::numeric_limits<double>::quiet_NaN();
  std::size_t containment_failures = 0;

  bool ok() const noexcept {
    return violating_pairs.empty() && containment_failures == 0;
  }
};

/// Serializes the report as a JSON object with the field names above.
std::string to_json(const ValidationReport& report, int indent = 2);

/// Relative slack applied to the spacing threshold.
inline constexpr double spacing_tolerance = 1e-9;

/// Axis-aligned bucket grid over a point set for neighborhood searches.
template <int D>
class BucketGrid {
 public:
  BucketGrid(std::span<const Point<D>> points, double side) : points_(points), side_(side) {
    lo_.fill(std::numeric_limits<double>::infinity());
    for (const auto& p : points)
      for (int i = 0; i < D; ++i) lo_[i] = std::min(lo_[i], p[i]);
    buckets_.reserve(points.size());
    extent_.fill(0);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const auto c = coords(points[k]);
      for (int i = 0; i < D; ++i) extent_[i] = std::max(extent_[i], c[i]);
      buckets_[key(c)].push_back(static_cast<std::uint32_t>(k));
    }
  }

  double side() const noexcept { return side_; }

  std::array<std::int64_t, D> coords(const Point<D>& p) const noexcept {
    std::array<std::int64_t, D> c;
    for (int i = 0; i < D; ++i) c[i] = static_cast<std::int64_t>(std::floor((p[i] - lo_[i]) / side_));
    return c;
  }

  const std::vector<std::uint32_t>* bucket(const std::array<std::int64_t, D>& c) const {
    auto it = buckets_.find(key(c));
    return it == buckets_.end() ? nullptr : &it->second;
  }

  /// Visits every non-empty bucket whose coords differ from `c` by at most
  /// `ring` on each axis, with Chebyshev distance exactly `ring` when `shell`.
  template <class Fn>
  void for_each_bucket_near(const std::array<std::int64_t, D>& c, std::int64_t ring, bool shell, Fn&& fn) const {
    std::array<std::int64_t, D> off;
    off.fill(-ring);
    for (;;) {
      std::int64_t cheb = 0;
      std::array<std::int64_t, D> q;
      for (int i = 0; i < D; ++i) {
        q[i] = c[i] + off[i];
        cheb = std::max(cheb, off[i] < 0 ? -off[i] : off[i]);
      }
      if (!shell || cheb == ring)
        if (const auto* b = bucket(q)) fn(*b);
      int axis = 0;
      while (axis < D && off[axis] == ring) off[axis++] = -ring;
      if (axis == D) break;
      ++off[axis];
    }
  }

  /// Exact nearest stored point to `q`, ignoring index `skip`: (index, distance).
  std::pair<std::size_t, double> nearest(const Point<D>& q,
                                         std::size_t skip = std::numeric_limits<std::size_t>::max()) const {
    const auto c = coords(q);
    double best2 = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::int64_t ring = 0;; ++ring) {
      for_each_bucket_near(c, ring, true, [&](const std::vector<std::uint32_t>& b) {
        for (std::uint32_t k : b) {
          if (k == skip) continue;
          const double d2 = squared_distance<D>(points_[k], q);
          if (d2 < best2) best2 = d2, best = k;
        }
      });
      // Anything outside the visited rings is at least `ring * side` away.
      const double reach = static_cast<double>(ring) * side_;
      if (best2 <= reach * reach || ring > rings_to_cover(c)) break;
    }
    return {best, std::sqrt(best2)};
  }

 private:
  /// Ring index beyond which no bucket can be occupied.
  std::int64_t rings_to_cover(const std::array<std::int64_t, D>& c) const noexcept {
    std::int64_t r = 0;
    for (int i = 0; i < D; ++i) r = std::max({r, c[i] < 0 ? -c[i] : c[i], extent_[i] - c[i]});
    return r;
  }

  static std::uint64_t key(const std::array<std::int64_t, D>& c) noexcept {
    std::uint64_t h = 0;
    for (int i = 0; i < D; ++i) h = mix64(h ^ static_cast<std::uint64_t>(c[i]));
    return h;
  }

  std::span<const Point<D>> points_;
  double side_;
  Point<D> lo_;
  std::array<std::int64_t, D> extent_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
};

namespace detail {

template <int D>
bool violates(const Point<D>& p, const Point<D>& q, const Spacing<D>& s, double d) noexcept {
  return d < std::min(s.at(p), s.at(q)) * (1.0 - spacing_tolerance);
}

inline void sort_pairs(std::vector<ViolatingPair>& v) {
  std::sort(v.begin(), v.end(), [](const ViolatingPair& a, const ViolatingPair& b) {
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
}

}  // namespace detail

/// Exact O(n^2) spacing check.
template <int D>
ValidationReport check_spacing_all_pairs(std::span<const Point<D>> points, const Spacing<D>& s) {
  ValidationReport r;
  r.n_points = points.size();
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = distance<D>(points[i], points[j]);
      r.min_pair_distance = std::min(r.min_pair_distance, d);
      if (detail::violates<D>(points[i], points[j], s, d)) r.violating_pairs.push_back({i, j, d});
    }
  detail::sort_pairs(r.violating_pairs);
  return r;
}

/// Spacing check on a bucket grid of side max h; every violating pair lies in
/// adjacent buckets, so the result equals the all-pairs check.
template <int D>
ValidationReport check_spacing_bucketed(std::span<const Point<D>> points, const Spacing<D>& s) {
  ValidationReport r;
  r.n_points = points.size();
  if (points.size() < 2) return r;
  double side = 0.0;
  for (const auto& p : points) side = std::max(side, s.at(p));
  const BucketGrid<D> grid(points, side);
  for (std::size_t i = 0; i < points.size(); ++i) {
    grid.for_each_bucket_near(grid.coords(points[i]), 1, false, [&](const std::vector<std::uint32_t>& b) {
      for (std::uint32_t j : b) {
        if (j <= i) continue;
        const double d = distance<D>(points[i], points[j]);
        r.min_pair_distance = std::min(r.min_pair_distance, d);
        if (detail::violates<D>(points[i], points[j], s, d)) r.violating_pairs.push_back({i, j, d});
      }
    });
  }
  if (!(r.min_pair_distance <= side)) {
    // No pair within one bucket width: the minimum needs an unbounded search.
    for (std::size_t i = 0; i < points.size(); ++i)
      r.min_pair_distance = std::min(r.min_pair_distance, grid.nearest(points[i], i).second);
  }
  detail::sort_pairs(r.violating_pairs);
  return r;
}

/// Threshold between the all-pairs and bucketed routes.
inline constexpr std::size_t all_pairs_limit = 10000;

template <int D>
ValidationReport check_spacing(std::span<const Point<D>> points, const Spacing<D>& s) {
  return points.size() <= all_pairs_limit ? check_spacing_all_pairs<D>(points, s) : check_spacing_bucketed<D>(points, s);
}

/// Largest (distance to nearest point) / h(sample) over uniform domain samples.
template <int D>
double check_coverage(const Domain<D>& domain, std::span<const Point<D>> points, const Spacing<D>& s,
                      std::size_t n_samples, RandomStream& rng) {
  if (points.empty()) return std::numeric_limits<double>::infinity();
  const double side = s.max_in(domain.bounding_box());
  const BucketGrid<D> grid(points, side);
  double worst = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Point<D> q = domain.sample(rng);
    worst = std::max(worst, grid.nearest(q).second / s.at(q));
  }
  return worst;
}

template <int D>
std::size_t count_containment_failures(const Domain<D>& domain, std::span<const Point<D>> points) {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [&](const Point<D>& p) { return !domain.contains(p); }));
}

/// Spacing, containment and coverage in one report.
template <int D>
ValidationReport validate_points(const Domain<D>& domain, std::span<const Point<D>> points, const Spacing<D>& s,
                                 std::size_t n_samples, RandomStream& rng) {
  ValidationReport r = check_spacing<D>(points, s);
  r.containment_failures = count_containment_failures<D>(domain, points);
  if (n_samples > 0 && !points.empty()) r.coverage_max_gap = check_coverage<D>(domain, points, s, n_samples, rng);
  return r;
}

template <int D>
struct RepairResult {
  std::vector<Point<D>> points;
  /// Original index of every retained point, ascending.
  std::vector<std::size_t> kept;
  std::size_t removed = 0;
  std::size_t violating_pairs = 0;
  /// Smallest violating distance divided by min(h(p), h(q)); 1 when none.
  double min_violation_ratio = 1.0;
};

/// Greedy repair: walk violating pairs by ascending distance and drop the
/// larger index of each pair that still has both ends.
template <int D>
RepairResult<D> repair_proximity(std::span<const Point<D>> points, const Spacing<D>& s) {
  ValidationReport report = check_spacing<D>(points, s);
  auto& pairs = report.violating_pairs;
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const ViolatingPair& a, const ViolatingPair& b) { return a.distance < b.distance; });
  RepairResult<D> out;
  out.violating_pairs = pairs.size();
  std::vector<bool> removed(points.size(), false);
  for (const ViolatingPair& v : pairs) {
    out.min_violation_ratio =
        std::min(out.min_violation_ratio, v.distance / std::min(s.at(points[v.first]), s.at(points[v.second])));
    if (removed[v.first] || removed[v.second]) continue;
    removed[std::max(v.first, v.second)] = true;
    ++out.removed;
  }
  out.points.reserve(points.size() - out.removed);
  out.kept.reserve(points.size() - out.removed);
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!removed[i]) {
      out.points.push_back(points[i]);
      out.kept.push_back(i);
    }
  return out;
}

}  // namespace hyperfill
