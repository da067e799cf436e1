#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "hyperfill/geometry.hpp"

namespace hyperfill {

template <int D>
using GridCoords = std::array<std::uint32_t, D>;

/// Boundary `index` of a dyadic subdivision of [lo, hi] at `level`.
///
/// Both trees derive every box from this one expression so that spatial
/// nodes and work cells agree bit for bit on their boundaries.
inline double subdivision_coordinate(double lo, double hi, int level, std::uint64_t index) noexcept {
  const std::uint64_t n = std::uint64_t{1} << level;
  if (index >= n) return hi;
  return lo + static_cast<double>(index) * std::ldexp(hi - lo, -level);
}

template <int D>
Box<D> subdivision_box(const Box<D>& root, int level, const GridCoords<D>& coords) noexcept {
  Box<D> b;
  for (int i = 0; i < D; ++i) {
    b.lo[i] = subdivision_coordinate(root.lo[i], root.hi[i], level, coords[i]);
    b.hi[i] = subdivision_coordinate(root.lo[i], root.hi[i], level, std::uint64_t{coords[i]} + 1);
  }
  return b;
}

/// Row-major (axis 0 fastest) index into a grid of 2^level cells per axis.
template <int D>
std::size_t linear_index(const GridCoords<D>& coords, int level) noexcept {
  std::size_t idx = 0;
  for (int i = D - 1; i >= 0; --i) idx = (idx << level) | coords[i];
  return idx;
}

template <int D>
GridCoords<D> grid_coords(std::size_t idx, int level) noexcept {
  GridCoords<D> c;
  const std::size_t mask = (std::size_t{1} << level) - 1;
  for (int i = 0; i < D; ++i) {
    c[i] = static_cast<std::uint32_t>(idx & mask);
    idx >>= level;
  }
  return c;
}

}  // namespace hyperfill
