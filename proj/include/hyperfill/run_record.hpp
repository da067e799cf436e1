#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "hyperfill/fill.hpp"
#include "hyperfill/validate.hpp"

namespace hyperfill {

/// Work leaf limit used when nothing else is requested.
inline constexpr std::size_t recommended_work_leaf_limit = 100;

struct ValidationSummary {
  std::size_t n_points = 0;
  double min_pair_distance = 0.0;
  std::size_t violating_pairs = 0;
  double coverage_max_gap = 0.0;
  std::size_t containment_failures = 0;

  static ValidationSummary from(const ValidationReport& r) {
    return {r.n_points, r.min_pair_distance, r.violating_pairs.size(), r.coverage_max_gap, r.containment_failures};
  }
};

/// One fill execution: config echo, statistics, optional validation, provenance.
struct RunRecord {
  int dim = 2;
  std::string algorithm = "parallel";
  std::string domain;
  std::string spacing;
  int threads = 1;
  int candidates = 0;
  int spatial_leaf_capacity = 40;
  std::size_t work_leaf_limit = recommended_work_leaf_limit;
  std::uint64_t rng_seed = 0;
  int max_stages = 64;
  bool repair = true;
  FillStats stats;
  std::optional<ValidationSummary> validation;
  std::string hostname;
  std::string timestamp;
  int repetition = 0;

  double throughput_per_thread() const noexcept { return stats.throughput / threads; }
};

std::string to_json(const RunRecord& r, int indent = 2);

/// CSV header and row; `sweep` adds the recommended-leaf flag column.
std::string csv_header(bool sweep = false);
std::string csv_row(const RunRecord& r, bool sweep = false);

std::string local_hostname();
/// UTC, ISO 8601 with seconds.
std::string utc_timestamp();

}  // namespace hyperfill
