#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>

#include "hyperfill/fill.hpp"
#include "hyperfill/io.hpp"
#include "hyperfill/run_record.hpp"
#include "hyperfill/validate.hpp"

namespace py = pybind11;
using namespace hyperfill;

namespace {

using Coords = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <int D>
std::vector<Point<D>> to_points(const Coords& a) {
  if (a.ndim() != 2 || a.shape(1) != D) throw std::invalid_argument("points must have shape (n, " + std::to_string(D) + ")");
  std::vector<Point<D>> out(static_cast<std::size_t>(a.shape(0)));
  if (!out.empty()) std::memcpy(out.data(), a.data(), out.size() * sizeof(Point<D>));
  return out;
}

template <int D>
Coords to_array(const std::vector<Point<D>>& pts) {
  Coords a({static_cast<py::ssize_t>(pts.size()), static_cast<py::ssize_t>(D)});
  if (!pts.empty()) std::memcpy(a.mutable_data(), pts.data(), pts.size() * sizeof(Point<D>));
  return a;
}

struct FillArgs {
  std::string h, domain, algorithm;
  int threads, candidates, spatial_leaf, max_stages;
  std::size_t work_leaf;
  std::uint64_t seed;
  bool repair;
};

template <int D>
py::tuple fill_impl(const FillArgs& a) {
  const DomainSpec ds = parse_domain(a.domain);
  const SpacingSpec ss = parse_spacing(a.h);
  const Domain<D> domain = make_domain<D>(ds);
  FillConfig<D> cfg(domain, make_spacing<D>(ss, domain));
  cfg.threads = a.threads;
  if (a.candidates > 0) cfg.candidates = a.candidates;
  cfg.spatial_leaf_capacity = a.spatial_leaf;
  cfg.work_leaf_limit = a.work_leaf;
  cfg.rng_seed = a.seed;
  cfg.max_stages = a.max_stages;
  cfg.repair = a.repair;
  const bool sequential = a.algorithm == "sequential" || (a.algorithm == "auto" && a.threads == 1);
  if (!sequential && a.algorithm != "auto" && a.algorithm != "parallel")
    throw std::invalid_argument("algorithm must be auto, sequential or parallel");

  FillResult<D> r = [&] {
    py::gil_scoped_release release;
    return sequential ? fill_sequential<D>(cfg) : fill_parallel<D>(cfg);
  }();

  RunRecord rec;
  rec.dim = D;
  rec.algorithm = sequential ? "sequential" : "parallel";
  rec.domain = ds.text;
  rec.spacing = ss.text;
  rec.threads = cfg.threads;
  rec.candidates = cfg.candidates;
  rec.spatial_leaf_capacity = cfg.spatial_leaf_capacity;
  rec.work_leaf_limit = cfg.work_leaf_limit;
  rec.rng_seed = cfg.rng_seed;
  rec.max_stages = cfg.max_stages;
  rec.repair = cfg.repair;
  rec.stats = r.stats;

  py::object owner = py::none();
  if (!sequential) owner = py::array_t<std::int32_t>(static_cast<py::ssize_t>(r.points.owner.size()), r.points.owner.data());
  return py::make_tuple(to_array<D>(r.points.points), owner, to_json(rec, -1));
}

template <int D>
std::string validate_impl(const Coords& pts, const std::string& h, const std::string& domain_text,
                          std::size_t samples, std::uint64_t seed) {
  const auto points = to_points<D>(pts);
  const Domain<D> domain = make_domain<D>(parse_domain(domain_text));
  const Spacing<D> spacing = make_spacing<D>(parse_spacing(h), domain);
  RandomStream rng(seed, 0xc0ffee);
  py::gil_scoped_release release;
  return to_json(validate_points<D>(domain, points, spacing, samples, rng), -1);
}

template <int D>
py::tuple repair_impl(const Coords& pts, const std::string& h, const std::string& domain_text) {
  const auto points = to_points<D>(pts);
  const Domain<D> domain = make_domain<D>(parse_domain(domain_text));
  const auto r = repair_proximity<D>(points, make_spacing<D>(parse_spacing(h), domain));
  return py::make_tuple(to_array<D>(r.points), py::array_t<std::size_t>(static_cast<py::ssize_t>(r.kept.size()), r.kept.data()));
}

int dim_of(const Coords& pts) { return pts.ndim() == 2 ? static_cast<int>(pts.shape(1)) : 0; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Parallel advancing-front point fills";
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<FillError>(m, "FillError", PyExc_RuntimeError);

  m.def(
      "fill",
      [](const std::string& h, const std::string& domain, int dim, int threads, const std::string& algorithm,
         std::uint64_t seed, std::size_t work_leaf, int spatial_leaf, int candidates, int max_stages, bool repair) {
        const FillArgs a{h, domain, algorithm, threads, candidates, spatial_leaf, max_stages, work_leaf, seed, repair};
        if (dim == 2) return fill_impl<2>(a);
        if (dim == 3) return fill_impl<3>(a);
        throw std::invalid_argument("dim must be 2 or 3");
      },
      py::arg("h"), py::arg("domain") = "disc:1", py::arg("dim") = 2, py::arg("threads") = 1,
      py::arg("algorithm") = "auto", py::arg("seed") = 0, py::arg("work_leaf") = 100, py::arg("spatial_leaf") = 40,
      py::arg("candidates") = 0, py::arg("max_stages") = 64, py::arg("repair") = true,
      "Fill a domain; returns (points, owner or None, run record JSON).");

  m.def(
      "validate",
      [](const Coords& pts, const std::string& h, const std::string& domain, std::size_t samples, std::uint64_t seed) {
        if (dim_of(pts) == 2) return validate_impl<2>(pts, h, domain, samples, seed);
        if (dim_of(pts) == 3) return validate_impl<3>(pts, h, domain, samples, seed);
        throw std::invalid_argument("points must have shape (n, 2) or (n, 3)");
      },
      py::arg("points"), py::arg("h"), py::arg("domain") = "disc:1", py::arg("samples") = 10000, py::arg("seed") = 0,
      "Validation report JSON for a point array.");

  m.def(
      "repair",
      [](const Coords& pts, const std::string& h, const std::string& domain) {
        if (dim_of(pts) == 2) return repair_impl<2>(pts, h, domain);
        if (dim_of(pts) == 3) return repair_impl<3>(pts, h, domain);
        throw std::invalid_argument("points must have shape (n, 2) or (n, 3)");
      },
      py::arg("points"), py::arg("h"), py::arg("domain") = "disc:1",
      "Greedy proximity repair; returns (points, kept original indices).");
}
