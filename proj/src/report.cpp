#include <unistd.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hyperfill/io.hpp"
#include "hyperfill/run_record.hpp"
#include "hyperfill/validate.hpp"

namespace hyperfill {

namespace {

using nlohmann::json;

// JSON has no infinity/NaN; emit null instead.
json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json stats_json(const FillStats& s) {
  return {
      {"total_wall_time", s.total_wall_time},
      {"setup_time", s.setup_time},
      {"repair_time", s.repair_time},
      {"per_stage_times", s.per_stage_times},
      {"per_thread_active_time", s.per_thread_active_time},
      {"points_inserted", s.points_inserted},
      {"stages", s.stages},
      {"stage0_fraction", s.stage0_fraction()},
      {"throughput", s.throughput},
      {"repair_removals", s.repair_removals},
      {"repair_violating_pairs", s.repair_violating_pairs},
      {"repair_min_ratio", s.repair_min_ratio},
      {"restart_pushes", s.restart_pushes},
      {"claims", s.claims},
      {"conflicts", s.conflicts},
      {"seed_threads", s.seed_threads},
      {"work_depth", s.work_depth},
      {"work_cells", s.work_cells},
  };
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double mean_active_fraction(const FillStats& s) {
  if (s.per_thread_active_time.empty() || s.total_wall_time <= 0.0) return 1.0;
  const double sum = std::accumulate(s.per_thread_active_time.begin(), s.per_thread_active_time.end(), 0.0);
  return sum / static_cast<double>(s.per_thread_active_time.size()) / s.total_wall_time;
}

}  // namespace

std::string to_json(const ValidationReport& r, int indent) {
  json pairs = json::array();
  for (const auto& p : r.violating_pairs) pairs.push_back({p.first, p.second, p.distance});
  const json j = {
      {"n_points", r.n_points},
      {"min_pair_distance", real(r.min_pair_distance)},
      {"violating_pairs", pairs},
      {"coverage_max_gap", real(r.coverage_max_gap)},
      {"containment_failures", r.containment_failures},
  };
  return j.dump(indent);
}

std::string to_json(const RunRecord& r, int indent) {
  json j = {
      {"config",
       {{"dim", r.dim},
        {"algorithm", r.algorithm},
        {"domain", r.domain},
        {"spacing", r.spacing},
        {"threads", r.threads},
        {"candidates", r.candidates},
        {"spatial_leaf_capacity", r.spatial_leaf_capacity},
        {"work_leaf_limit", r.work_leaf_limit},
        {"rng_seed", r.rng_seed},
        {"max_stages", r.max_stages},
        {"repair", r.repair}}},
      {"stats", stats_json(r.stats)},
      {"throughput_per_thread", r.throughput_per_thread()},
      {"hostname", r.hostname},
      {"timestamp", r.timestamp},
      {"repetition", r.repetition},
  };
  if (r.validation) {
    const auto& v = *r.validation;
    j["validation"] = {{"n_points", v.n_points},
                       {"min_pair_distance", real(v.min_pair_distance)},
                       {"violating_pairs", v.violating_pairs},
                       {"coverage_max_gap", real(v.coverage_max_gap)},
                       {"containment_failures", v.containment_failures}};
  }
  return j.dump(indent);
}

std::string csv_header(bool sweep) {
  std::string h =
      "dim,algorithm,domain,spacing,threads,candidates,spatial_leaf,work_leaf,seed,max_stages,repetition,hostname,"
      "timestamp,points,total_wall_time,setup_time,repair_time,stages,stage0_fraction,mean_active_fraction,"
      "throughput_total,throughput_per_thread,restart_pushes,claims,conflicts,repair_removals,work_depth,"
      "min_pair_distance,violating_pairs,coverage_max_gap,containment_failures";
  if (sweep) h += ",recommended_leaf";
  return h;
}

std::string csv_row(const RunRecord& r, bool sweep) {
  const FillStats& s = r.stats;
  std::ostringstream os;
  os << r.dim << ',' << r.algorithm << ',' << csv_field(r.domain) << ',' << csv_field(r.spacing) << ',' << r.threads
     << ',' << r.candidates << ',' << r.spatial_leaf_capacity << ',' << r.work_leaf_limit << ',' << r.rng_seed << ','
     << r.max_stages << ',' << r.repetition << ',' << csv_field(r.hostname) << ',' << r.timestamp << ','
     << s.points_inserted << ',' << format_real(s.total_wall_time) << ',' << format_real(s.setup_time) << ','
     << format_real(s.repair_time) << ',' << s.stages << ',' << format_real(s.stage0_fraction()) << ','
     << format_real(mean_active_fraction(s)) << ',' << format_real(s.throughput) << ','
     << format_real(r.throughput_per_thread()) << ',' << s.restart_pushes << ',' << s.claims << ',' << s.conflicts
     << ',' << s.repair_removals << ',' << s.work_depth << ',';
  if (r.validation) {
    const auto& v = *r.validation;
    os << format_real(v.min_pair_distance) << ',' << v.violating_pairs << ',' << format_real(v.coverage_max_gap) << ','
       << v.containment_failures;
  } else {
    os << ",,,";
  }
  if (sweep) os << ',' << (r.work_leaf_limit == recommended_work_leaf_limit ? 1 : 0);
  return os.str();
}

std::string local_hostname() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace hyperfill
