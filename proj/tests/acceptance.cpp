// Acceptance gate: one PASS/FAIL/SKIP line per criterion; nonzero exit on any FAIL.
// The lines also go to acceptance_results.txt in the working directory.

#include <sched.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "claim_stress.hpp"
#include "hyperfill/fill.hpp"
#include "hyperfill/io.hpp"
#include "hyperfill/validate.hpp"
#include "test_support.hpp"

using namespace hyperfill;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Physical cores available to this process: distinct (package, core) pairs
/// among the CPUs in the affinity mask.
int available_physical_cores() {
  cpu_set_t set;
  CPU_ZERO(&set);
  if (sched_getaffinity(0, sizeof set, &set) != 0) return 1;
  std::set<std::pair<int, int>> cores;
  int logical = 0;
  for (int cpu = 0; cpu < CPU_SETSIZE; ++cpu) {
    if (!CPU_ISSET(cpu, &set)) continue;
    ++logical;
    const std::string base = "/sys/devices/system/cpu/cpu" + std::to_string(cpu) + "/topology/";
    std::ifstream pkg(base + "physical_package_id"), core(base + "core_id");
    int p = 0, c = cpu;
    if (pkg >> p && core >> c) cores.insert({p, c});
    else cores.insert({0, cpu});
  }
  return cores.empty() ? std::max(logical, 1) : static_cast<int>(cores.size());
}

struct Outcome {
  enum Kind { pass, fail, skip } kind;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const Domain<2> disc = Domain<2>::disc({0, 0}, 1.0);

FillConfig<2> config(double h, int threads, std::uint64_t seed, std::size_t leaf = 100) {
  FillConfig<2> c(disc, Spacing<2>::constant(h));
  c.threads = threads;
  c.rng_seed = seed;
  c.work_leaf_limit = leaf;
  return c;
}

Outcome c1_sequential() {
  const auto cfg = config(0.05, 1, 0);
  const auto t0 = Clock::now();
  const auto r = fill_sequential<2>(cfg);
  const double t = seconds_since(t0);
  const auto& p = r.points.points;
  const std::size_t outside = count_containment_failures<2>(disc, p);
  const double dmin = hftest::brute_min_distance<2>(p);
  RandomStream rng(1);
  const double gap = check_coverage<2>(disc, p, cfg.spacing, 10000, rng);
  return verdict(outside == 0 && dmin >= 0.05 * (1 - 1e-9) && gap <= 2.0 && t < 1.0,
                 fmt("n=%zu outside=%zu min_dist=%.6f gap=%.3f time=%.3fs", p.size(), outside, dmin, gap, t));
}

Outcome c2_scale() {
  const auto cfg = config(0.001, 8, 0);
  const auto t0 = Clock::now();
  const auto r = fill_parallel<2>(cfg);
  const double t = seconds_since(t0);
  const double n = static_cast<double>(r.points.size());
  return verdict(n >= 1.7e6 && n <= 2.6e6 && t < 120.0, fmt("T=8 n=%.0f time=%.2fs", n, t));
}

// Shared by criteria 3, 4 and 6.
struct DensityRuns {
  double sequential_mean = 0.0;
  std::vector<std::pair<int, double>> parallel_mean;
  std::size_t points = 0, violating = 0, removals = 0;
  double min_ratio = 1.0;
  double min_stage0 = 1.0;
};

const DensityRuns& density_runs() {
  static const DensityRuns runs = [] {
    DensityRuns d;
    constexpr int reps = 10;
    for (int s = 0; s < reps; ++s)
      d.sequential_mean += static_cast<double>(fill_sequential<2>(config(0.005, 1, s)).points.size()) / reps;
    for (int t : {1, 2, 4, 8}) {
      double mean = 0.0;
      for (int s = 0; s < reps; ++s) {
        const auto r = fill_parallel<2>(config(0.005, t, s));
        mean += static_cast<double>(r.points.size()) / reps;
        d.points += r.stats.points_inserted;
        d.violating += r.stats.repair_violating_pairs;
        d.removals += r.stats.repair_removals;
        d.min_ratio = std::min(d.min_ratio, r.stats.repair_min_ratio);
        d.min_stage0 = std::min(d.min_stage0, r.stats.stage0_fraction());
      }
      if (t > 1) d.parallel_mean.emplace_back(t, mean);
    }
    return d;
  }();
  return runs;
}

Outcome c3_density() {
  const auto& d = density_runs();
  bool ok = true;
  std::string detail = fmt("seq=%.1f", d.sequential_mean);
  for (auto [t, mean] : d.parallel_mean) {
    const double rel = std::abs(mean - d.sequential_mean) / d.sequential_mean;
    ok = ok && rel < 0.02;
    detail += fmt(" T=%d:%.1f(%.3f%%)", t, mean, 100 * rel);
  }
  return verdict(ok, detail);
}

Outcome c4_spacing() {
  const auto& d = density_runs();
  // Post-repair cleanliness is checked independently on fresh 8-thread fills.
  std::size_t post = 0;
  for (int s = 0; s < 3; ++s) {
    const auto cfg = config(0.005, 8, 100 + s);
    post += check_spacing<2>(fill_parallel<2>(cfg).points.points, cfg.spacing).violating_pairs.size();
  }
  const double pts = static_cast<double>(d.points);
  const double vfrac = static_cast<double>(d.violating) / pts, rfrac = static_cast<double>(d.removals) / pts;
  return verdict(vfrac < 1e-4 && d.min_ratio >= 0.5 && post == 0 && rfrac < 1e-4,
                 fmt("pre_violating=%zu (%.2e of points) min_ratio=%.3f removals=%zu (%.2e) post_violations=%zu",
                     d.violating, vfrac, d.min_ratio, d.removals, rfrac, post));
}

Outcome c5_claims() {
  const auto t0 = Clock::now();
  std::size_t claims = 0, violations = 0, snapshots = 0, busy = 0;
  for (int rep = 0; rep < 10; ++rep) {
    auto work = WorkTree<2>::build(Domain<2>::box({0, 0}, {1, 1}), Spacing<2>::constant(0.01), 100);
    if (work->cells_per_axis() != 16) return {Outcome::fail, "work grid is not 16x16"};
    const auto r = hftest::claim_stress<2>(*work, 8, 100000, 1000 + rep);
    claims += r.claims, violations += r.violations, snapshots += r.snapshots, busy += r.busy_snapshots;
  }
  const double t = seconds_since(t0);
  return verdict(violations == 0 && busy > 0 && t < 60.0,
                 fmt("claims=%zu snapshots=%zu busy=%zu violations=%zu time=%.2fs", claims, snapshots, busy,
                     violations, t));
}

// Shared by criteria 6 and 8: h=0.002 leaf sweep.
struct SweepRuns {
  std::vector<std::pair<int, double>> ratio;  // (T, max/min median throughput)
  std::string detail;
  double min_stage0 = 1.0;
};

const SweepRuns& sweep_runs() {
  static const SweepRuns runs = [] {
    SweepRuns s;
    for (int t : {2, 8}) {
      std::vector<double> med;
      for (std::size_t leaf : {25, 50, 100, 200, 400, 800}) {
        std::vector<double> tp;
        for (int rep = 0; rep < 5; ++rep) {
          const auto r = fill_parallel<2>(config(0.002, t, rep, leaf));
          tp.push_back(r.stats.throughput);
          s.min_stage0 = std::min(s.min_stage0, r.stats.stage0_fraction());
        }
        med.push_back(median(tp));
      }
      const auto [lo, hi] = std::minmax_element(med.begin(), med.end());
      s.ratio.emplace_back(t, *hi / *lo);
      s.detail += fmt(" T=%d:ratio=%.3f(%.3g..%.3g pts/s)", t, *hi / *lo, *lo, *hi);
    }
    return s;
  }();
  return runs;
}

Outcome c6_staging() {
  const double f = std::min(density_runs().min_stage0, sweep_runs().min_stage0);
  return verdict(f >= 0.95, fmt("min stage0 fraction=%.4f over T in {1,2,4,8} at h=0.005 and T in {2,8} at h=0.002", f));
}

Outcome c7_scaling() {
  const int cores = available_physical_cores();
  if (cores < 4) return {Outcome::skip, fmt("needs >= 4 physical cores, found %d", cores)};
  auto med = [](int t) {
    std::vector<double> tp;
    for (int rep = 0; rep < 5; ++rep) tp.push_back(fill_parallel<2>(config(0.0005, t, rep)).stats.throughput);
    return median(tp);
  };
  const double one = med(1), four = med(4);
  return verdict(four >= 2.0 * one, fmt("T=1 %.3g pts/s, T=4 %.3g pts/s, speedup %.2f", one, four, four / one));
}

Outcome c8_leaf() {
  const auto& s = sweep_runs();
  bool ok = true;
  for (auto [t, ratio] : s.ratio) ok = ok && ratio <= 2.0;
  return verdict(ok, s.detail.substr(1));
}

Outcome c9_oracles() {
  RandomStream rng(9);
  const Box<2> root = hftest::cube<2>(-1.0, 1.0);
  SpatialTree<2> tree(root, 2);
  const auto pts = hftest::uniform_points<2>(rng, root, 1000);
  for (const auto& p : pts) tree.insert(p);
  std::size_t ball_mismatch = 0;
  for (int q = 0; q < 1000; ++q) {
    const Point<2> c = hftest::uniform_point<2>(rng, root);
    const double r = rng.uniform(0.0, 0.2);
    ball_mismatch += tree.has_point_within(c, r) != hftest::brute_has_point_within<2>(pts, c, r);
  }
  std::size_t bucket_mismatch = 0;
  for (double h : {0.01, 0.03, 0.1}) {
    const auto s = Spacing<2>::constant(h);
    const auto a = check_spacing_all_pairs<2>(pts, s), b = check_spacing_bucketed<2>(pts, s);
    bucket_mismatch += a.violating_pairs != b.violating_pairs || a.min_pair_distance != b.min_pair_distance;
  }
  return verdict(ball_mismatch == 0 && bucket_mismatch == 0,
                 fmt("ball query mismatches=%zu/1000, bucketed mismatches=%zu/3", ball_mismatch, bucket_mismatch));
}

Outcome c10_determinism() {
  auto csv = [] {
    std::ostringstream os;
    write_points_csv<2>(os, fill_sequential<2>(config(0.01, 1, 42)).points.points);
    return os.str();
  };
  const bool same = csv() == csv();
  int failures = 0;
  for (int run = 0; run < 20; ++run) {
    const auto cfg = config(0.005, 8, 42);
    const auto r = fill_parallel<2>(cfg);
    RandomStream rng(static_cast<std::uint64_t>(run));
    const auto v = validate_points<2>(disc, r.points.points, cfg.spacing, 10000, rng);
    failures += !(v.ok() && v.coverage_max_gap <= 2.0);
  }
  return verdict(same && failures == 0,
                 fmt("sequential byte-identical=%s, parallel invariant failures=%d/20", same ? "yes" : "no", failures));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"sequential correctness", c1_sequential}, {"scale sanity", c2_scale},
      {"parallel density", c3_density},          {"parallel spacing", c4_spacing},
      {"claim separation", c5_claims},           {"staging dominance", c6_staging},
      {"strong scaling", c7_scaling},            {"leaf-limit insensitivity", c8_leaf},
      {"oracle equivalence", c9_oracles},        {"determinism", c10_determinism},
  };
  std::FILE* log = std::fopen("acceptance_results.txt", "w");
  int failed = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
    failed += o.kind == Outcome::fail;
    for (std::FILE* f : {stdout, log}) {
      if (f == nullptr) continue;
      std::fprintf(f, "%s criterion %d (%s): %s\n", tag, index, name, o.detail.c_str());
      std::fflush(f);
    }
  }
  if (log != nullptr) std::fclose(log);
  return failed == 0 ? 0 : 1;
}
