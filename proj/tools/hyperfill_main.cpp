// hyperfill: fills, benchmarks, leaf-size sweeps and validation from the shell.
//
// Exit codes: 0 ok, 1 usage, 2 invariant failure, 3 internal error.

#include <pthread.h>
#include <sched.h>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hyperfill/event_log.hpp"
#include "hyperfill/fill.hpp"
#include "hyperfill/io.hpp"
#include "hyperfill/run_record.hpp"
#include "hyperfill/validate.hpp"

namespace {

using namespace hyperfill;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_invariant = 2;
constexpr int exit_internal = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string domain = "disc:1";
  std::vector<std::string> h{"0.01"};
  std::vector<int> threads{1};
  std::vector<std::size_t> work_leaf{recommended_work_leaf_limit};
  int spatial_leaf = 40;
  int candidates = 0;
  std::uint64_t seed = 0;
  int reps = 1;
  int max_stages = 64;
  int dim = 2;
  std::string algorithm = "auto";
  std::string out;
  std::string stats;
  std::string events;
  std::string in;
  std::size_t samples = 10000;
  bool validate = false;
  bool pin = false;
  bool no_repair = false;
};

void pin_to_core(int t) {
  const unsigned n = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(static_cast<int>(static_cast<unsigned>(t) % n), &set);
  pthread_setaffinity_np(pthread_self(), sizeof set, &set);  // best effort
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot open '" + path + "' for writing");
  return os;
}

std::string resolve_algorithm(const Options& o, int threads) {
  if (o.algorithm == "auto") return threads == 1 ? "sequential" : "parallel";
  if (o.algorithm == "parallel" || o.algorithm == "sequential") {
    if (o.algorithm == "sequential" && threads != 1) throw UsageError("--algorithm sequential needs --threads 1");
    return o.algorithm;
  }
  throw UsageError("--algorithm must be auto, sequential or parallel");
}

template <int D>
struct Run {
  RunRecord record;
  FillResult<D> result;
  std::optional<ValidationReport> report;
};

template <int D>
Run<D> run_once(const Options& o, const std::string& h_text, int threads, std::size_t work_leaf, int rep,
                EventLog* events) {
  const DomainSpec ds = parse_domain(o.domain);
  const SpacingSpec ss = parse_spacing(h_text);
  const Domain<D> domain = make_domain<D>(ds);
  FillConfig<D> cfg(domain, make_spacing<D>(ss, domain));
  cfg.threads = threads;
  if (o.candidates > 0) cfg.candidates = o.candidates;
  cfg.spatial_leaf_capacity = o.spatial_leaf;
  cfg.work_leaf_limit = work_leaf;
  cfg.rng_seed = o.seed;
  cfg.max_stages = o.max_stages;
  cfg.repair = !o.no_repair;
  cfg.events = events;
  if (o.pin) cfg.on_worker_start = pin_to_core;

  Run<D> run;
  RunRecord& r = run.record;
  r.dim = D;
  r.algorithm = resolve_algorithm(o, threads);
  r.domain = ds.text;
  r.spacing = ss.text;
  r.threads = threads;
  r.candidates = cfg.candidates;
  r.spatial_leaf_capacity = cfg.spatial_leaf_capacity;
  r.work_leaf_limit = cfg.work_leaf_limit;
  r.rng_seed = cfg.rng_seed;
  r.max_stages = cfg.max_stages;
  r.repair = cfg.repair;
  r.hostname = local_hostname();
  r.timestamp = utc_timestamp();
  r.repetition = rep;

  if (r.algorithm == "sequential") {
    if (o.pin) pin_to_core(0);
    run.result = fill_sequential<D>(cfg);
  } else {
    run.result = fill_parallel<D>(cfg);
  }
  r.stats = run.result.stats;
  if (o.validate) {
    RandomStream rng(o.seed, 0xc0ffee);
    run.report = validate_points<D>(cfg.domain, run.result.points.points, cfg.spacing, o.samples, rng);
    r.validation = ValidationSummary::from(*run.report);
  }
  return run;
}

template <int D>
int cmd_fill(const Options& o) {
  if (o.h.size() != 1 || o.threads.size() != 1 || o.work_leaf.size() != 1)
    throw UsageError("fill takes a single --h, --threads and --work-leaf value");
  const int threads = o.threads.front();
  std::unique_ptr<EventLog> log;
  if (!o.events.empty()) {
    if (resolve_algorithm(o, threads) != "parallel") throw UsageError("--events needs a parallel fill");
    log = std::make_unique<EventLog>(threads);
  }
  const Run<D> run = run_once<D>(o, o.h.front(), threads, o.work_leaf.front(), 0, log.get());

  if (!o.out.empty()) {
    auto os = open_out(o.out);
    const auto& ps = run.result.points;
    write_points_csv<D>(os, std::span<const Point<D>>(ps.points),
                        run.record.algorithm == "parallel" ? std::span<const std::int32_t>(ps.owner)
                                                           : std::span<const std::int32_t>());
  }
  if (log) {
    auto os = open_out(o.events);
    log->write_csv(os);
  }
  const std::string json = to_json(run.record);
  if (!o.stats.empty()) {
    auto os = open_out(o.stats);
    os << json << '\n';
  } else if (!o.out.empty()) {
    std::cout << json << '\n';
  }
  if (run.report && !run.report->ok()) {
    std::cerr << "validation failed: " << run.report->violating_pairs.size() << " violating pairs, "
              << run.report->containment_failures << " points outside the domain\n";
    return exit_invariant;
  }
  return exit_ok;
}

template <int D>
int cmd_grid(const Options& o, bool sweep) {
  if (o.reps < 1) throw UsageError("--reps must be at least 1");
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty()) {
    file = open_out(o.out);
    os = &file;
  }
  *os << csv_header(sweep) << '\n';
  bool failed = false;
  for (const auto& h : o.h)
    for (std::size_t leaf : o.work_leaf)
      for (int t : o.threads)
        for (int rep = 0; rep < o.reps; ++rep) {
          const Run<D> run = run_once<D>(o, h, t, leaf, rep, nullptr);
          *os << csv_row(run.record, sweep) << '\n' << std::flush;
          failed = failed || (run.report && !run.report->ok());
        }
  return failed ? exit_invariant : exit_ok;
}

template <int D>
int cmd_validate(const Options& o) {
  if (o.in.empty()) throw UsageError("validate needs --in");
  if (o.h.size() != 1) throw UsageError("validate takes a single --h value");
  std::ifstream is(o.in, std::ios::binary);
  if (!is) throw UsageError("cannot open '" + o.in + "'");
  const PointTable table = read_points_csv(is);
  if (table.dim != D) throw UsageError("points file has dimension " + std::to_string(table.dim));
  const std::vector<Point<D>> pts = table.points<D>();
  const Domain<D> domain = make_domain<D>(parse_domain(o.domain));
  const Spacing<D> spacing = make_spacing<D>(parse_spacing(o.h.front()), domain);
  RandomStream rng(o.seed, 0xc0ffee);
  const ValidationReport report = validate_points<D>(domain, pts, spacing, o.samples, rng);
  std::cout << to_json(report) << '\n';
  return report.ok() ? exit_ok : exit_invariant;
}

template <int D>
int dispatch(const std::string& command, const Options& o) {
  if (command == "fill") return cmd_fill<D>(o);
  if (command == "bench") return cmd_grid<D>(o, false);
  if (command == "sweep-leaf") return cmd_grid<D>(o, true);
  return cmd_validate<D>(o);
}

void add_fill_flags(CLI::App* c, Options& o) {
  c->add_option("--domain", o.domain, "disc:R[@c0,c1,..] or box:LO..HI")->capture_default_str();
  c->add_option("--h", o.h, "spacing: H or H0:H1 (radial); lists allowed for bench/sweep-leaf")
      ->delimiter(',')
      ->capture_default_str();
  c->add_option("--threads", o.threads, "thread count(s)")->delimiter(',')->capture_default_str();
  c->add_option("--work-leaf", o.work_leaf, "work tree leaf point limit(s)")->delimiter(',')->capture_default_str();
  c->add_option("--spatial-leaf", o.spatial_leaf, "spatial tree leaf capacity")->capture_default_str();
  c->add_option("--candidates", o.candidates, "candidates per expansion (0: 6 in 2D, 12 otherwise)");
  c->add_option("--seed", o.seed, "rng seed")->capture_default_str();
  c->add_option("--max-stages", o.max_stages, "stage cap for parallel fills")->capture_default_str();
  c->add_option("--dim", o.dim, "dimension (2 or 3)")->capture_default_str();
  c->add_option("--algorithm", o.algorithm, "auto, sequential or parallel")->capture_default_str();
  c->add_option("--samples", o.samples, "coverage samples for --validate")->capture_default_str();
  c->add_flag("--validate", o.validate, "check spacing, containment and coverage");
  c->add_flag("--pin", o.pin, "pin worker threads to cores");
  c->add_flag("--no-repair", o.no_repair, "skip the proximity repair after parallel fills");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel advancing-front point fill"};
  app.set_help_flag("--help", "print this help and exit");  // -h would shadow --h
  app.require_subcommand(1);
  Options o;

  auto* fill = app.add_subcommand("fill", "run one fill and write points and stats");
  add_fill_flags(fill, o);
  fill->add_option("--out", o.out, "points CSV");
  fill->add_option("--stats", o.stats, "stats JSON (stdout when --out is given and this is not)");
  fill->add_option("--events", o.events, "work-tree event log CSV");

  auto* bench = app.add_subcommand("bench", "repeated fills over threads x h; CSV rows");
  add_fill_flags(bench, o);
  bench->add_option("--reps", o.reps, "repetitions per configuration")->capture_default_str();
  bench->add_option("--out", o.out, "CSV output (default stdout)");

  auto* sweep = app.add_subcommand("sweep-leaf", "benchmark grid over work leaf limits");
  add_fill_flags(sweep, o);
  sweep->add_option("--reps", o.reps, "repetitions per configuration")->capture_default_str();
  sweep->add_option("--out", o.out, "CSV output (default stdout)");

  auto* validate = app.add_subcommand("validate", "check a points CSV; JSON report on stdout");
  validate->add_option("--in", o.in, "points CSV")->required();
  validate->add_option("--domain", o.domain, "domain the points should lie in")->capture_default_str();
  validate->add_option("--h", o.h, "spacing used for the fill")->capture_default_str();
  validate->add_option("--samples", o.samples, "coverage samples")->capture_default_str();
  validate->add_option("--seed", o.seed, "coverage sampling seed")->capture_default_str();
  validate->add_option("--dim", o.dim, "dimension (2 or 3)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "sweep-leaf" && sweep->count("--work-leaf") == 0) o.work_leaf = {25, 50, 100, 200, 400, 800};

  try {
    for (int t : o.threads)
      if (t < 1) throw UsageError("--threads values must be at least 1");
    if (o.dim == 2) return dispatch<2>(command, o);
    if (o.dim == 3) return dispatch<3>(command, o);
    throw UsageError("--dim must be 2 or 3");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.get_subcommands().front()->help();
    return exit_usage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const FillError& e) {
    std::cerr << "fill failed: " << e.what() << " (" << e.residual_cells.size() << " residual cells)\n";
    return exit_invariant;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return exit_internal;
  }
}
