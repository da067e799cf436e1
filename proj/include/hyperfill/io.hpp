#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hyperfill/geometry.hpp"

namespace hyperfill {

/// Malformed input; `line` is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line(line) {}
  std::size_t line;
};

/// Dimension-erased point table as read from CSV.
struct PointTable {
  int dim = 0;
  std::vector<double> coords;  ///< row-major, dim values per point
  std::vector<std::int32_t> owner;  ///< empty when the file has no owner column

  std::size_t size() const noexcept { return dim > 0 ? coords.size() / static_cast<std::size_t>(dim) : 0; }

  template <int D>
  std::vector<Point<D>> points() const {
    if (dim != D) throw std::invalid_argument("point table dimension mismatch");
    std::vector<Point<D>> out(size());
    for (std::size_t i = 0; i < out.size(); ++i)
      for (int k = 0; k < D; ++k) out[i][static_cast<std::size_t>(k)] = coords[i * D + static_cast<std::size_t>(k)];
    return out;
  }
};

/// Shortest-exact text: 17 significant digits.
std::string format_real(double v);

/// Writes `x0,...,x{d-1}[,owner_thread]` CSV.
void write_points_csv(std::ostream& os, int dim, std::span<const double> coords, std::span<const std::int32_t> owner = {});

template <int D>
void write_points_csv(std::ostream& os, std::span<const Point<D>> points, std::span<const std::int32_t> owner = {}) {
  write_points_csv(os, D, std::span<const double>(points.empty() ? nullptr : points.data()->data(), points.size() * D),
                   owner);
}

PointTable read_points_csv(std::istream& is);

/// `disc:R`, `disc:R@c0,c1,...` or `box:LO..HI` with LO/HI scalars (broadcast)
/// or comma lists.
struct DomainSpec {
  enum class Kind { disc, box } kind = Kind::disc;
  double radius = 1.0;
  std::vector<double> center;
  std::vector<double> lo;
  std::vector<double> hi;
  std::string text;
};

DomainSpec parse_domain(std::string_view text);

/// `H` (constant) or `H0:H1` (radial linear from the domain center to its rim).
struct SpacingSpec {
  bool radial = false;
  double h0 = 0.0;
  double h1 = 0.0;
  std::string text;
};

SpacingSpec parse_spacing(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::vector<int> parse_int_list(std::string_view text);

template <int D>
Domain<D> make_domain(const DomainSpec& s) {
  auto expand = [](const std::vector<double>& v, double fallback) {
    Point<D> p;
    if (v.empty()) p.fill(fallback);
    else if (v.size() == 1) p.fill(v[0]);
    else if (v.size() == static_cast<std::size_t>(D)) std::copy(v.begin(), v.end(), p.begin());
    else throw ParseError("domain coordinate count does not match --dim");
    return p;
  };
  if (s.kind == DomainSpec::Kind::disc) return Domain<D>::disc(expand(s.center, 0.0), s.radius);
  return Domain<D>::box(expand(s.lo, 0.0), expand(s.hi, 1.0));
}

template <int D>
Spacing<D> make_spacing(const SpacingSpec& s, const Domain<D>& domain) {
  if (!s.radial) return Spacing<D>::constant(s.h0);
  return Spacing<D>::radial_linear(s.h0, s.h1, domain);
}

}  // namespace hyperfill
