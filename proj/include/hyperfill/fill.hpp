#pragma once

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "hyperfill/event_log.hpp"
#include "hyperfill/geometry.hpp"
#include "hyperfill/random.hpp"
#include "hyperfill/seeds.hpp"
#include "hyperfill/spatial_index.hpp"
#include "hyperfill/validate.hpp"
#include "hyperfill/work_tree.hpp"

namespace hyperfill {

/// Fill failure carrying the cells that were still pending, if any.
class FillError : public std::runtime_error {
 public:
  FillError(const std::string& what, std::vector<std::int32_t> residual = {})
      : std::runtime_error(what), residual_cells(std::move(residual)) {}
  std::vector<std::int32_t> residual_cells;
};

template <int D>
struct FillConfig {
  FillConfig(Domain<D> d, Spacing<D> s) : domain(std::move(d)), spacing(std::move(s)) {}

  Domain<D> domain;
  Spacing<D> spacing;
  int threads = 1;
  int candidates = default_candidates(D);
  int spatial_leaf_capacity = 40;
  std::size_t work_leaf_limit = 100;
  std::uint64_t rng_seed = 0;
  int max_stages = 64;
  int max_depth = 20;
  /// Run the proximity repair after a parallel fill.
  bool repair = true;
  SeedOptions seeding{};
  /// Instrument spatial leaves for overlapping writers.
  bool track_writers = false;
  /// Optional work-tree transition log; must be built for `threads` threads.
  EventLog* events = nullptr;
  /// Called on each worker thread before it starts (e.g. core pinning).
  std::function<void(int)> on_worker_start;
};

struct FillStats {
  /// Fill-phase wall time: first stage start to the end of the last stage.
  double total_wall_time = 0.0;
  /// Tree construction and seeding before the first stage.
  double setup_time = 0.0;
  double repair_time = 0.0;
  std::vector<double> per_stage_times;
  std::vector<double> per_thread_active_time;
  std::size_t points_inserted = 0;
  std::size_t stages = 0;
  /// points_inserted / total_wall_time.
  double throughput = 0.0;
  std::size_t repair_removals = 0;
  std::size_t repair_violating_pairs = 0;
  /// Smallest violating distance / local h before repair (1 when none).
  double repair_min_ratio = 1.0;
  std::size_t restart_pushes = 0;
  std::size_t claims = 0;
  std::size_t conflicts = 0;
  std::size_t seed_threads = 0;
  int work_depth = 0;
  std::size_t work_cells = 0;
  std::size_t writer_overlaps = 0;

  double stage0_fraction() const noexcept {
    const double sum = std::accumulate(per_stage_times.begin(), per_stage_times.end(), 0.0);
    return per_stage_times.empty() || sum <= 0.0 ? 1.0 : per_stage_times.front() / sum;
  }

  double active_fraction(std::size_t thread) const noexcept {
    return total_wall_time > 0.0 ? per_thread_active_time.at(thread) / total_wall_time : 1.0;
  }
};

template <int D>
struct PointSet {
  std::vector<Point<D>> points;
  /// Thread that inserted each point.
  std::vector<std::int32_t> owner;

  std::size_t size() const noexcept { return points.size(); }
};

template <int D>
struct FillResult {
  PointSet<D> points;
  FillStats stats;
};

namespace detail {

using Clock = std::chrono::steady_clock;

/// Equally spaced 2D candidates sit exactly h from their siblings; without a
/// little slack, rounding rejects about half of them and the front stalls.
inline constexpr double proximity_factor = 1.0 - 1e-10;

/// Candidate test: no stored point closer than the parent's spacing, nor
/// closer than min(h(c), h(q)) where the candidate's spacing is the larger one.
/// The second clause keeps the pairwise spacing bound under variable spacing.
template <int D>
bool blocked(const SpatialTree<D>& tree, const Spacing<D>& s, double parent_h, const Point<D>& c) {
  const double hc = s.at(c);
  if (hc <= parent_h) return tree.has_point_within(c, parent_h * proximity_factor);
  return tree.has_point_within(c, hc * proximity_factor, [&](const Point<D>& q, double d2) {
    const double bound = std::max(parent_h, std::min(hc, s.at(q))) * proximity_factor;
    return d2 < bound * bound;
  });
}

inline double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

template <int D>
bool accept_location(const Domain<D>& domain, const Point<D>& c) noexcept {
  return domain.contains(c) && domain.bounding_box().contains_closed(c);
}

template <int D>
void check_config(const FillConfig<D>& cfg) {
  if (cfg.threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (cfg.candidates < 1) throw std::invalid_argument("candidates must be at least 1");
  if (cfg.spatial_leaf_capacity < 1) throw std::invalid_argument("spatial leaf capacity must be at least 1");
  if (cfg.work_leaf_limit < 1) throw std::invalid_argument("work leaf limit must be at least 1");
  if (cfg.max_stages < 1) throw std::invalid_argument("max stages must be at least 1");
}

/// Stream id reserved for the stage-boundary coordinator.
inline constexpr std::uint64_t coordinator_stream = 1'000'000;
inline constexpr std::uint64_t seeding_stream = 2'000'000;

}  // namespace detail

/// Sequential advancing-front fill from the given seeds (FIFO expansion).
/// Bit-reproducible for a fixed config.
template <int D>
FillResult<D> fill_sequential(const FillConfig<D>& cfg, std::span<const Point<D>> seeds) {
  detail::check_config(cfg);
  if (seeds.empty()) throw std::invalid_argument("sequential fill needs at least one seed");
  for (const auto& s : seeds)
    if (!detail::accept_location<D>(cfg.domain, s)) throw std::invalid_argument("seed lies outside the domain");

  const auto t0 = detail::Clock::now();
  const auto work = WorkTree<D>::build(cfg.domain, cfg.spacing, cfg.work_leaf_limit, cfg.max_depth);
  SpatialTree<D> tree(cfg.domain.bounding_box(), work->depth(),
                      {cfg.spatial_leaf_capacity, cfg.max_depth, false});
  RandomStream rng(cfg.rng_seed, 0);

  FillResult<D> out;
  out.stats.setup_time = detail::seconds_since(t0);
  const auto t1 = detail::Clock::now();

  std::deque<std::size_t> queue;
  for (const auto& s : seeds) queue.push_back(tree.insert(s).point_index);
  std::vector<Point<D>> candidates;
  while (!queue.empty()) {
    const Point<D> p = tree.point(queue.front());
    queue.pop_front();
    const double r = cfg.spacing.at(p);
    generate_candidates<D>(p, r, cfg.candidates, rng, candidates);
    for (const auto& c : candidates) {
      if (!detail::accept_location<D>(cfg.domain, c) ||
          detail::blocked<D>(tree, cfg.spacing, r, c))
        continue;
      queue.push_back(tree.insert(c).point_index);
    }
  }

  FillStats& st = out.stats;
  st.total_wall_time = detail::seconds_since(t1);
  st.per_stage_times = {st.total_wall_time};
  st.per_thread_active_time = {st.total_wall_time};
  st.stages = 1;
  st.points_inserted = tree.count();
  st.throughput = st.total_wall_time > 0.0 ? static_cast<double>(st.points_inserted) / st.total_wall_time : 0.0;
  st.work_depth = work->depth();
  st.work_cells = work->size();
  st.seed_threads = 1;
  out.points.points = tree.all_points();
  out.points.owner.assign(out.points.points.size(), 0);
  return out;
}

/// Convenience: sequential fill from a single seed at the domain center.
template <int D>
FillResult<D> fill_sequential(const FillConfig<D>& cfg) {
  const Point<D> c = cfg.domain.center();
  return fill_sequential<D>(cfg, std::span<const Point<D>>(&c, 1));
}

/// Per-thread worker context for the parallel fill.
template <int D>
class FillWorker {
 public:
  FillWorker(int id, std::uint64_t seed, const FillConfig<D>& cfg, SpatialTree<D>& tree, WorkTree<D>& work,
             RestartQueue& restart, ConcurrentArena<std::int32_t>& owners)
      : id_(id), rng_(seed, static_cast<std::uint64_t>(id) + 1), cfg_(cfg), tree_(tree), work_(work),
        restart_(restart), owners_(owners) {}

  /// Enqueues every point already stored inside a freshly claimed cell.
  void adopt_cell(std::int32_t cell) {
    tree_.for_each_point_under(work_.cell(cell).spatial_node, [&](std::size_t idx) { enqueue({idx, cell}); });
  }

  /// Runs the FIFO front until this thread's queue is empty.
  void run_stage(const std::atomic<bool>& abort) {
    while (!queue_.empty()) {
      if (abort.load(std::memory_order_relaxed)) return;
      const ExpansionEntry e = queue_.front();
      queue_.pop_front();
      expand_point(e);
      if (work_.adjust_front_count(e.cell_index, -1) == 0) work_.release(e.cell_index, id_, failed_);
    }
    work_.release_failed(id_, failed_);
  }

  /// Generates candidates around the entry's point and files accepted ones:
  /// same or already-held cell -> local queue; otherwise try to claim the cell,
  /// and on conflict leave the point stored but push a restart entry.
  void expand_point(const ExpansionEntry& e) {
    const Point<D> p = tree_.point(e.point_index);
    const double r = cfg_.spacing.at(p);
    generate_candidates<D>(p, r, cfg_.candidates, rng_, candidates_);
    for (const auto& c : candidates_) {
      if (!detail::accept_location<D>(cfg_.domain, c) ||
          detail::blocked<D>(tree_, cfg_.spacing, r, c))
        continue;
      const auto ins = tree_.insert(c, id_);
      owners_.slot(ins.point_index) = id_;
      const std::int32_t cell = ins.work_cell;
      if (cell == e.cell_index || work_.held_by(cell, id_)) {
        enqueue({ins.point_index, cell});
        continue;
      }
      const ClaimOutcome o = work_.try_claim(cell, id_);
      if (o.claimed) {
        ++claims_;
        if (o.was_enqueued) adopt_cell(cell);
        else enqueue({ins.point_index, cell});
        continue;
      }
      ++conflicts_;
      if (o.holds_attempt) failed_.push_back(cell);
      if (o.won_enqueue) {
        restart_.push({ins.point_index, cell});
        ++restart_pushes_;
        if (auto* log = work_.event_log()) log->record(id_, cell, Transition::restart_push);
      }
    }
  }

  int id() const noexcept { return id_; }
  std::size_t queue_size() const noexcept { return queue_.size(); }
  const std::vector<std::int32_t>& failed_claims() const noexcept { return failed_; }

  double active_time = 0.0;
  std::size_t claims_ = 0;
  std::size_t conflicts_ = 0;
  std::size_t restart_pushes_ = 0;

 private:
  void enqueue(const ExpansionEntry& e) {
    queue_.push_back(e);
    work_.adjust_front_count(e.cell_index, +1);
  }

  int id_;
  RandomStream rng_;
  const FillConfig<D>& cfg_;
  SpatialTree<D>& tree_;
  WorkTree<D>& work_;
  RestartQueue& restart_;
  ConcurrentArena<std::int32_t>& owners_;
  std::deque<ExpansionEntry> queue_;
  std::vector<std::int32_t> failed_;
  std::vector<Point<D>> candidates_;
};

namespace detail {

/// Picks one seed per thread such that no two seed cells coincide or touch.
/// Re-relaxes with fresh substreams a few times, then keeps a greedy subset.
template <int D>
std::vector<Point<D>> choose_seeds(const FillConfig<D>& cfg, const SpatialTree<D>& tree, const WorkTree<D>& work) {
  constexpr int attempts = 10;
  std::vector<Point<D>> last;
  for (int a = 0; a < attempts; ++a) {
    RandomStream rng(cfg.rng_seed, seeding_stream + static_cast<std::uint64_t>(a));
    last = place_seeds<D>(cfg.domain, static_cast<std::size_t>(cfg.threads), rng, cfg.seeding);
    bool ok = true;
    for (std::size_t i = 0; i < last.size() && ok; ++i)
      for (std::size_t j = i + 1; j < last.size() && ok; ++j) {
        const std::int32_t ci = tree.locate_cell(last[i]), cj = tree.locate_cell(last[j]);
        ok = ci != cj && !work.adjacent(ci, cj);
      }
    if (ok) return last;
  }
  std::vector<Point<D>> kept;
  std::vector<std::int32_t> cells;
  for (const auto& s : last) {
    const std::int32_t c = tree.locate_cell(s);
    bool clash = false;
    for (std::int32_t k : cells) clash = clash || k == c || work.adjacent(k, c);
    if (!clash) {
      kept.push_back(s);
      cells.push_back(c);
    }
  }
  return kept;
}

}  // namespace detail

/// Multi-stage parallel fill over the work tree.
///
/// Stage 0 starts one relaxed seed per thread. Threads expand private FIFO
/// fronts and claim work cells as their points spill over; claim conflicts are
/// deferred to the restart queue. When every queue is empty the threads meet at
/// a barrier, the coordinator draws at most one enqueued cell per thread from
/// the restart queue, and the next stage begins. The fill ends when the drain
/// yields nothing.
template <int D>
FillResult<D> fill_parallel(const FillConfig<D>& cfg) {
  detail::check_config(cfg);
  const auto t0 = detail::Clock::now();
  const int threads = cfg.threads;

  const auto work = WorkTree<D>::build(cfg.domain, cfg.spacing, cfg.work_leaf_limit, cfg.max_depth);
  SpatialTree<D> tree(cfg.domain.bounding_box(), work->depth(),
                      {cfg.spatial_leaf_capacity, cfg.max_depth, cfg.track_writers});
  work->link_spatial(tree);
  work->set_event_log(cfg.events);
  RestartQueue restart;
  ConcurrentArena<std::int32_t> owners(16, std::size_t{1} << 15);

  std::vector<std::unique_ptr<FillWorker<D>>> workers;
  for (int t = 0; t < threads; ++t)
    workers.push_back(std::make_unique<FillWorker<D>>(t, cfg.rng_seed, cfg, tree, *work, restart, owners));

  // Stage 0 assignments: one seed per thread, each claiming its seed's cell.
  std::vector<std::optional<std::int32_t>> assigned(static_cast<std::size_t>(threads));
  const std::vector<Point<D>> seeds = detail::choose_seeds<D>(cfg, tree, *work);
  for (std::size_t t = 0; t < seeds.size(); ++t) {
    const auto ins = tree.insert(seeds[t], static_cast<int>(t));
    owners.slot(ins.point_index) = static_cast<std::int32_t>(t);
    const ClaimOutcome o = work->try_claim(ins.work_cell, static_cast<int>(t));
    if (!o.claimed) throw FillError("seed cell could not be claimed");
    assigned[t] = ins.work_cell;
  }

  FillResult<D> out;
  FillStats& st = out.stats;
  st.setup_time = detail::seconds_since(t0);
  st.seed_threads = seeds.size();

  RandomStream coordinator_rng(cfg.rng_seed, detail::coordinator_stream);
  std::atomic<bool> abort{false};
  bool done = false;
  bool first = true;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::int32_t> residual;
  detail::Clock::time_point fill_start, stage_start, fill_end;

  auto on_stage_boundary = [&]() noexcept {
    const auto now = detail::Clock::now();
    if (first) {
      first = false;
      fill_start = stage_start = now;
      st.stages = 1;
      return;
    }
    st.per_stage_times.push_back(std::chrono::duration<double>(now - stage_start).count());
    if (abort.load()) {
      done = true;
      fill_end = now;
      return;
    }
    try {
      if (st.stages >= static_cast<std::size_t>(cfg.max_stages)) {
        std::unordered_set<std::int32_t> pending;
        for (const auto& e : restart.snapshot())
          if (work->state(e.cell_index) == CellState::enqueued) pending.insert(e.cell_index);
        residual.assign(pending.begin(), pending.end());
        done = true;
        fill_end = detail::Clock::now();
        return;
      }
      DrainResult drain = work->restart_drain_stage(restart, threads, coordinator_rng);
      if (drain.assignments.empty()) {
        done = true;
        fill_end = detail::Clock::now();
        return;
      }
      for (const Assignment& a : drain.assignments) assigned[static_cast<std::size_t>(a.thread)] = a.entry.cell_index;
      ++st.stages;
      stage_start = detail::Clock::now();
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      done = true;
      fill_end = detail::Clock::now();
    }
  };

  std::barrier sync(threads, on_stage_boundary);
  auto body = [&](int t) {
    FillWorker<D>& w = *workers[static_cast<std::size_t>(t)];
    if (cfg.on_worker_start) cfg.on_worker_start(t);
    for (;;) {
      sync.arrive_and_wait();
      if (done) break;
      const auto begin = detail::Clock::now();
      try {
        auto& slot = assigned[static_cast<std::size_t>(t)];
        if (slot) {
          w.adopt_cell(*slot);
          slot.reset();
        }
        w.run_stage(abort);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        abort.store(true);
      }
      w.active_time += detail::seconds_since(begin);
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body, t);
  }
  if (failure) std::rethrow_exception(failure);
  if (!residual.empty())
    throw FillError("fill did not finish within " + std::to_string(cfg.max_stages) + " stages", residual);

  st.total_wall_time = std::chrono::duration<double>(fill_end - fill_start).count();
  st.points_inserted = tree.count();
  st.throughput = st.total_wall_time > 0.0 ? static_cast<double>(st.points_inserted) / st.total_wall_time : 0.0;
  st.work_depth = work->depth();
  st.work_cells = work->size();
  st.writer_overlaps = tree.writer_overlaps();
  for (const auto& w : workers) {
    st.per_thread_active_time.push_back(w->active_time);
    st.claims += w->claims_;
    st.conflicts += w->conflicts_;
    st.restart_pushes += w->restart_pushes_;
  }

  std::vector<Point<D>> pts = tree.all_points();
  std::vector<std::int32_t> own(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) own[i] = owners[i];

  if (cfg.repair) {
    const auto tr = detail::Clock::now();
    RepairResult<D> rep = repair_proximity<D>(pts, cfg.spacing);
    st.repair_removals = rep.removed;
    st.repair_violating_pairs = rep.violating_pairs;
    st.repair_min_ratio = rep.min_violation_ratio;
    if (rep.removed > 0) {
      std::vector<std::int32_t> kept_owner;
      kept_owner.reserve(rep.kept.size());
      for (std::size_t k : rep.kept) kept_owner.push_back(own[k]);
      own.swap(kept_owner);
      pts.swap(rep.points);
    }
    st.repair_time = detail::seconds_since(tr);
  }
  out.points.points = std::move(pts);
  out.points.owner = std::move(own);
  return out;
}

}  // namespace hyperfill

namespace hyperfill {

extern template FillResult<2> fill_parallel<2>(const FillConfig<2>&);
extern template FillResult<3> fill_parallel<3>(const FillConfig<3>&);
extern template FillResult<2> fill_sequential<2>(const FillConfig<2>&, std::span<const Point<2>>);
extern template FillResult<3> fill_sequential<3>(const FillConfig<3>&, std::span<const Point<3>>);

}  // namespace hyperfill
