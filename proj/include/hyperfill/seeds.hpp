#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hyperfill/geometry.hpp"
#include "hyperfill/random.hpp"

namespace hyperfill {

struct SeedOptions {
  int iterations = 50;
  /// First-iteration step limit as a fraction of the domain scale.
  double max_step = 0.1;
  /// Geometric decay of the step limit per iteration.
  double step_decay = 0.92;
};

/// Net repulsive force on `p` from the other seeds (1/r potential) and from its
/// image charge mirrored across the nearest boundary point.
template <int D>
Point<D> seed_force(const Domain<D>& domain, const std::vector<Point<D>>& seeds, std::size_t self) {
  const Point<D>& p = seeds[self];
  Point<D> f{};
  auto add = [&](const Point<D>& q) {
    const double r2 = squared_distance<D>(p, q);
    if (r2 <= 0.0) return;
    const double inv = 1.0 / (r2 * std::sqrt(r2));
    for (int i = 0; i < D; ++i) f[i] += (p[i] - q[i]) * inv;
  };
  for (std::size_t j = 0; j < seeds.size(); ++j)
    if (j != self) add(seeds[j]);
  const Point<D> b = domain.nearest_boundary_point(p);
  Point<D> image;
  for (int i = 0; i < D; ++i) image[i] = 2.0 * b[i] - p[i];
  add(image);
  return f;
}

/// Places `n` seeds: uniform random draw, then a fixed number of relaxation
/// steps along the repulsive force with a decaying step limit.
template <int D>
std::vector<Point<D>> place_seeds(const Domain<D>& domain, std::size_t n, RandomStream& rng, const SeedOptions& opt = {}) {
  std::vector<Point<D>> seeds(n);
  for (auto& s : seeds) s = domain.sample(rng);
  const double scale = domain.scale();
  const double margin = 1e-3 * scale;
  std::vector<Point<D>> next(n);
  double limit = opt.max_step * scale;
  for (int it = 0; it < opt.iterations; ++it, limit *= opt.step_decay) {
    for (std::size_t k = 0; k < n; ++k) {
      Point<D> f = seed_force<D>(domain, seeds, k);
      double norm = 0.0;
      for (double v : f) norm += v * v;
      norm = std::sqrt(norm);
      // Forces scale as 1/length^2, so length^3 makes the raw step dimensionless.
      const double raw = 0.05 * scale * scale * scale * norm;
      const double step = std::min(raw, limit);
      Point<D> q = seeds[k];
      if (norm > 0.0)
        for (int i = 0; i < D; ++i) q[i] += f[i] / norm * step;
      next[k] = domain.clamp_inside(q, margin);
    }
    seeds.swap(next);
  }
  return seeds;
}

}  // namespace hyperfill
