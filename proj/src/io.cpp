#include "hyperfill/io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <system_error>

namespace hyperfill {

namespace {

double parse_real(std::string_view s, std::size_t line = 0) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ParseError("not a number: '" + std::string(s) + "'", line);
  return v;
}

std::int32_t parse_int(std::string_view s, std::size_t line = 0) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  std::int32_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ParseError("not an integer: '" + std::string(s) + "'", line);
  return v;
}

std::vector<double> parse_real_list(std::string_view s) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_real(part));
  return out;
}

}  // namespace

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_int(part));
  return out;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void write_points_csv(std::ostream& os, int dim, std::span<const double> coords, std::span<const std::int32_t> owner) {
  const std::size_t n = coords.size() / static_cast<std::size_t>(dim);
  const bool with_owner = !owner.empty();
  if (with_owner && owner.size() != n) throw std::invalid_argument("owner column length mismatch");
  for (int k = 0; k < dim; ++k) os << (k ? "," : "") << 'x' << k;
  if (with_owner) os << ",owner_thread";
  os << '\n';
  std::string row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (int k = 0; k < dim; ++k) {
      if (k) row += ',';
      row += format_real(coords[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)]);
    }
    if (with_owner) {
      row += ',';
      row += std::to_string(owner[i]);
    }
    row += '\n';
    os << row;
  }
}

PointTable read_points_csv(std::istream& is) {
  PointTable t;
  std::string line;
  std::size_t lineno = 0;
  bool with_owner = false;
  if (!std::getline(is, line)) throw ParseError("empty points file", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == "x" + std::to_string(k)) {
      if (with_owner) throw ParseError("owner_thread must be the last column", lineno);
      ++t.dim;
    } else if (header[k] == "owner_thread" && k + 1 == header.size()) {
      with_owner = true;
    } else {
      throw ParseError("unexpected header column '" + header[k] + "'", lineno);
    }
  }
  if (t.dim == 0) throw ParseError("header has no coordinate columns", lineno);
  const std::size_t columns = static_cast<std::size_t>(t.dim) + (with_owner ? 1 : 0);
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != columns)
      throw ParseError("expected " + std::to_string(columns) + " columns, got " + std::to_string(cells.size()), lineno);
    for (int k = 0; k < t.dim; ++k) {
      const double v = parse_real(cells[static_cast<std::size_t>(k)], lineno);
      if (!std::isfinite(v)) throw ParseError("non-finite coordinate", lineno);
      t.coords.push_back(v);
    }
    if (with_owner) t.owner.push_back(parse_int(cells.back(), lineno));
  }
  return t;
}

DomainSpec parse_domain(std::string_view text) {
  DomainSpec s;
  s.text = std::string(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ParseError("domain must look like disc:R or box:LO..HI");
  const std::string_view kind = text.substr(0, colon);
  const std::string_view body = text.substr(colon + 1);
  if (kind == "disc") {
    s.kind = DomainSpec::Kind::disc;
    const auto at = body.find('@');
    s.radius = parse_real(body.substr(0, at));
    if (!(s.radius > 0.0)) throw ParseError("disc radius must be positive");
    if (at != std::string_view::npos) s.center = parse_real_list(body.substr(at + 1));
  } else if (kind == "box") {
    s.kind = DomainSpec::Kind::box;
    const auto dots = body.find("..");
    if (dots == std::string_view::npos) throw ParseError("box domain must look like box:LO..HI");
    s.lo = parse_real_list(body.substr(0, dots));
    s.hi = parse_real_list(body.substr(dots + 2));
  } else {
    throw ParseError("unknown domain kind '" + std::string(kind) + "'");
  }
  return s;
}

SpacingSpec parse_spacing(std::string_view text) {
  SpacingSpec s;
  s.text = std::string(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    s.h0 = s.h1 = parse_real(text);
  } else {
    s.radial = true;
    s.h0 = parse_real(text.substr(0, colon));
    s.h1 = parse_real(text.substr(colon + 1));
  }
  if (!(s.h0 > 0.0) || !(s.h1 > 0.0)) throw ParseError("spacing must be positive");
  return s;
}

}  // namespace hyperfill
