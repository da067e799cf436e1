#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperfill/random.hpp"

namespace hyperfill {

template <int D>
using Point = std::array<double, D>;

template <int D>
double squared_distance(const Point<D>& a, const Point<D>& b) noexcept {
  double s = 0.0;
  for (int i = 0; i < D; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

template <int D>
double distance(const Point<D>& a, const Point<D>& b) noexcept {
  return std::sqrt(squared_distance<D>(a, b));
}

template <int D>
bool is_finite(const Point<D>& p) noexcept {
  return std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

/// Axis-aligned box. Half-open [lo, hi) for ownership purposes; callers that
/// own the global upper boundary treat it as closed.
template <int D>
struct Box {
  Point<D> lo{};
  Point<D> hi{};

  Point<D> center() const noexcept {
    Point<D> c;
    for (int i = 0; i < D; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }

  double volume() const noexcept {
    double v = 1.0;
    for (int i = 0; i < D; ++i) v *= hi[i] - lo[i];
    return v;
  }

  bool contains_closed(const Point<D>& p) const noexcept {
    for (int i = 0; i < D; ++i)
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    return true;
  }

  /// Squared distance from `p` to the nearest point of the box (0 inside).
  double squared_distance_to(const Point<D>& p) const noexcept {
    double s = 0.0;
    for (int i = 0; i < D; ++i) {
      double t = 0.0;
      if (p[i] < lo[i]) t = lo[i] - p[i];
      else if (p[i] > hi[i]) t = p[i] - hi[i];
      s += t * t;
    }
    return s;
  }

  /// Squared distance from `p` to the farthest corner of the box.
  double squared_farthest_from(const Point<D>& p) const noexcept {
    double s = 0.0;
    for (int i = 0; i < D; ++i) {
      const double t = std::max(std::abs(p[i] - lo[i]), std::abs(hi[i] - p[i]));
      s += t * t;
    }
    return s;
  }
};

/// Fill region: a closed d-ball ("disc") or a closed box.
template <int D>
class Domain {
 public:
  enum class Kind { disc, box };

  static Domain disc(const Point<D>& center, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("disc radius must be positive");
    if (!is_finite<D>(center)) throw std::invalid_argument("disc center must be finite");
    Domain d;
    d.kind_ = Kind::disc;
    d.center_ = center;
    d.radius_ = radius;
    for (int i = 0; i < D; ++i) {
      d.bounds_.lo[i] = center[i] - radius;
      d.bounds_.hi[i] = center[i] + radius;
    }
    return d;
  }

  static Domain box(const Point<D>& lo, const Point<D>& hi) {
    for (int i = 0; i < D; ++i)
      if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
        throw std::invalid_argument("box requires finite lo < hi on every axis");
    Domain d;
    d.kind_ = Kind::box;
    d.bounds_ = Box<D>{lo, hi};
    d.center_ = d.bounds_.center();
    d.radius_ = 0.0;
    return d;
  }

  Kind kind() const noexcept { return kind_; }
  const Box<D>& bounding_box() const noexcept { return bounds_; }
  const Point<D>& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  /// Characteristic length: radius for a disc, smallest half extent for a box.
  double scale() const noexcept {
    if (kind_ == Kind::disc) return radius_;
    double s = bounds_.hi[0] - bounds_.lo[0];
    for (int i = 1; i < D; ++i) s = std::min(s, bounds_.hi[i] - bounds_.lo[i]);
    return 0.5 * s;
  }

  /// Closed-set membership (boundary counts as inside).
  bool contains(const Point<D>& p) const noexcept {
    if (kind_ == Kind::disc) return squared_distance<D>(p, center_) <= radius_ * radius_;
    return bounds_.contains_closed(p);
  }

  /// True when the box shares no point with the domain.
  bool disjoint_from(const Box<D>& b) const noexcept {
    if (kind_ == Kind::disc) return b.squared_distance_to(center_) > radius_ * radius_;
    for (int i = 0; i < D; ++i)
      if (b.hi[i] < bounds_.lo[i] || b.lo[i] > bounds_.hi[i]) return true;
    return false;
  }

  /// Nearest point on the domain boundary to an interior point `p`.
  Point<D> nearest_boundary_point(const Point<D>& p) const noexcept {
    Point<D> q = p;
    if (kind_ == Kind::disc) {
      const double r = distance<D>(p, center_);
      if (r == 0.0) {
        q[0] = center_[0] + radius_;
        return q;
      }
      for (int i = 0; i < D; ++i) q[i] = center_[i] + (p[i] - center_[i]) * (radius_ / r);
      return q;
    }
    int axis = 0;
    bool upper = false;
    double best = p[0] - bounds_.lo[0];
    for (int i = 0; i < D; ++i) {
      if (p[i] - bounds_.lo[i] < best) best = p[i] - bounds_.lo[i], axis = i, upper = false;
      if (bounds_.hi[i] - p[i] < best) best = bounds_.hi[i] - p[i], axis = i, upper = true;
    }
    q[axis] = upper ? bounds_.hi[axis] : bounds_.lo[axis];
    return q;
  }

  /// Moves `p` back inside the domain, at least `margin` away from the boundary when possible.
  Point<D> clamp_inside(const Point<D>& p, double margin) const noexcept {
    Point<D> q = p;
    if (kind_ == Kind::disc) {
      const double limit = std::max(0.0, radius_ - margin);
      const double r = distance<D>(p, center_);
      if (r > limit && r > 0.0)
        for (int i = 0; i < D; ++i) q[i] = center_[i] + (p[i] - center_[i]) * (limit / r);
      return q;
    }
    for (int i = 0; i < D; ++i) {
      const double m = std::min(margin, 0.5 * (bounds_.hi[i] - bounds_.lo[i]));
      q[i] = std::clamp(p[i], bounds_.lo[i] + m, bounds_.hi[i] - m);
    }
    return q;
  }

  /// Rejection-samples a uniform point in the domain.
  Point<D> sample(RandomStream& rng) const {
    for (;;) {
      Point<D> p;
      for (int i = 0; i < D; ++i) p[i] = rng.uniform(bounds_.lo[i], bounds_.hi[i]);
      if (contains(p)) return p;
    }
  }

  /// Volume of the shape itself (not the bounding box).
  double volume() const noexcept {
    if (kind_ == Kind::box) return bounds_.volume();
    // V_d(r) = pi^(d/2) / Gamma(d/2 + 1) r^d
    return std::pow(std::numbers::pi, 0.5 * D) / std::tgamma(0.5 * D + 1.0) * std::pow(radius_, D);
  }

 private:
  Domain() = default;

  Kind kind_ = Kind::box;
  Point<D> center_{};
  double radius_ = 0.0;
  Box<D> bounds_{};
};

/// Target spacing field h(p).
template <int D>
class Spacing {
 public:
  enum class Kind { constant, radial_linear };

  /// Largest allowed max/min ratio for a radial profile.
  static constexpr double max_ratio = 4.0;

  static Spacing constant(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("spacing must be positive and finite");
    Spacing s;
    s.h0_ = s.h1_ = h;
    return s;
  }

  /// h grows linearly from h0 at `center` to h1 at distance `radius`, constant beyond.
  static Spacing radial_linear(double h0, double h1, const Point<D>& center, double radius) {
    if (!(h0 > 0.0) || !(h1 > 0.0) || !std::isfinite(h0) || !std::isfinite(h1))
      throw std::invalid_argument("spacing must be positive and finite");
    if (std::max(h0, h1) > max_ratio * std::min(h0, h1))
      throw std::invalid_argument("radial spacing ratio exceeds " + std::to_string(max_ratio));
    if (!(radius > 0.0)) throw std::invalid_argument("radial spacing needs a positive radius");
    Spacing s;
    s.kind_ = Kind::radial_linear;
    s.h0_ = h0;
    s.h1_ = h1;
    s.center_ = center;
    s.radius_ = radius;
    return s;
  }

  /// Radial profile anchored at the domain center; reaches h1 at the disc rim
  /// (or at the half diagonal of a box).
  static Spacing radial_linear(double h0, double h1, const Domain<D>& domain) {
    double r = domain.radius();
    if (domain.kind() == Domain<D>::Kind::box)
      r = 0.5 * distance<D>(domain.bounding_box().lo, domain.bounding_box().hi);
    return radial_linear(h0, h1, domain.center(), r);
  }

  Kind kind() const noexcept { return kind_; }
  double h0() const noexcept { return h0_; }
  double h1() const noexcept { return h1_; }

  double at(const Point<D>& p) const noexcept {
    if (kind_ == Kind::constant) return h0_;
    return profile(distance<D>(p, center_));
  }

  double max_in(const Box<D>& b) const noexcept {
    if (kind_ == Kind::constant) return h0_;
    const double near = profile(std::sqrt(b.squared_distance_to(center_)));
    const double far = profile(std::sqrt(b.squared_farthest_from(center_)));
    return std::max(near, far);
  }

  double min_in(const Box<D>& b) const noexcept {
    if (kind_ == Kind::constant) return h0_;
    const double near = profile(std::sqrt(b.squared_distance_to(center_)));
    const double far = profile(std::sqrt(b.squared_farthest_from(center_)));
    return std::min(near, far);
  }

  /// Relative Lipschitz bound: |h(p) - h(q)| <= lipschitz() * |p - q|.
  double lipschitz() const noexcept {
    if (kind_ == Kind::constant) return 0.0;
    return std::abs(h1_ - h0_) / radius_;
  }

 private:
  Spacing() = default;

  double profile(double r) const noexcept {
    const double t = std::min(r / radius_, 1.0);
    return h0_ + (h1_ - h0_) * t;
  }

  Kind kind_ = Kind::constant;
  double h0_ = 1.0;
  double h1_ = 1.0;
  Point<D> center_{};
  double radius_ = 1.0;
};

template <int D>
bool contains(const Domain<D>& domain, const Point<D>& p) noexcept {
  return domain.contains(p);
}

template <int D>
double spacing_at(const Spacing<D>& s, const Point<D>& p) noexcept {
  return s.at(p);
}

/// Default number of candidates per expansion for a dimension.
constexpr int default_candidates(int dim) noexcept { return dim <= 2 ? 6 : 12; }

/// Candidates on the circle of `radius` around `p`: `k` equally spaced angles
/// starting at `rotation`.
inline void generate_circle_candidates(const Point<2>& p, double radius, int k, double rotation,
                                       std::vector<Point<2>>& out) {
  out.clear();
  const double step = 2.0 * std::numbers::pi / k;
  for (int j = 0; j < k; ++j) {
    const double a = rotation + step * j;
    out.push_back({p[0] + radius * std::cos(a), p[1] + radius * std::sin(a)});
  }
}

/// `k` candidates at distance `radius` from `p`. In 2D the angles are equally
/// spaced with one random rotation; otherwise directions are independent and
/// uniform on the sphere.
template <int D>
void generate_candidates(const Point<D>& p, double radius, int k, RandomStream& rng, std::vector<Point<D>>& out) {
  if constexpr (D == 2) {
    generate_circle_candidates(p, radius, k, rng.uniform(0.0, 2.0 * std::numbers::pi), out);
  } else {
    out.clear();
    for (int j = 0; j < k; ++j) {
      Point<D> dir;
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (int i = 0; i < D; ++i) {
          dir[i] = rng.normal();
          norm2 += dir[i] * dir[i];
        }
      } while (norm2 < 1e-24);
      const double scale = radius / std::sqrt(norm2);
      Point<D> q;
      for (int i = 0; i < D; ++i) q[i] = p[i] + dir[i] * scale;
      out.push_back(q);
    }
  }
}

template <int D>
std::vector<Point<D>> generate_candidates(const Point<D>& p, double radius, int k, RandomStream& rng) {
  std::vector<Point<D>> out;
  out.reserve(static_cast<std::size_t>(k));
  generate_candidates<D>(p, radius, k, rng, out);
  return out;
}

/// Expected point count in a box: volume / h(center)^d. Only ratios matter.
template <int D>
double estimate_count(const Box<D>& cell, const Spacing<D>& s) noexcept {
  return cell.volume() / std::pow(s.at(cell.center()), D);
}

}  // namespace hyperfill
