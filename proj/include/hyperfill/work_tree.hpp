#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "hyperfill/event_log.hpp"
#include "hyperfill/geometry.hpp"
#include "hyperfill/grid.hpp"
#include "hyperfill/random.hpp"
#include "hyperfill/spatial_index.hpp"

namespace hyperfill {

/// A point waiting to be expanded, tagged with the work cell containing it.
struct ExpansionEntry {
  std::size_t point_index = 0;
  std::int32_t cell_index = -1;

  friend bool operator==(const ExpansionEntry&, const ExpansionEntry&) = default;
};

enum class CellState { unclaimed, failed_claim, claimed, enqueued };

/// Maps the three claim flags to a state; nullopt for the impossible
/// combination `locked` without `lock_attempt`.
constexpr std::optional<CellState> decode_cell_state(bool lock_attempt, bool locked, bool enqueued) noexcept {
  if (locked) return lock_attempt ? std::optional{CellState::claimed} : std::nullopt;
  if (lock_attempt) return CellState::failed_claim;
  return enqueued ? CellState::enqueued : CellState::unclaimed;
}

/// Leaf of the work tree: the unit of exclusive thread ownership.
struct WorkCell {
  /// Lock-attempt flag. -1 when clear, otherwise the id of the thread that set it.
  std::atomic<std::int32_t> attempt_owner{-1};
  std::atomic<bool> enqueued{false};
  /// (generation << 32) | (owner + 1) while locked, generation << 32 otherwise.
  /// Written only by the thread holding the lock attempt.
  std::atomic<std::uint64_t> claim_word{0};
  /// Owner's expansion-queue entries inside this cell.
  std::int32_t front_count = 0;
  std::int32_t spatial_node = -1;
  bool inert = false;
};

struct ClaimOutcome {
  bool claimed = false;
  /// Claimed a cell that was in the enqueued state; its existing points need expanding.
  bool was_enqueued = false;
  /// Conflict path: this caller set the enqueued flag and must push a restart entry.
  bool won_enqueue = false;
  /// Conflict path: this caller still holds the lock-attempt flag (failed claim)
  /// and must promote the cell when it releases a neighbor.
  bool holds_attempt = false;
};

/// Global stage-boundary queue of deferred expansion entries.
class RestartQueue {
 public:
  void push(const ExpansionEntry& e) {
    std::lock_guard lock(mutex_);
    entries_.push_back(e);
  }

  std::vector<ExpansionEntry> take_all() {
    std::lock_guard lock(mutex_);
    return std::exchange(entries_, {});
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

  bool empty() const { return size() == 0; }

  std::vector<ExpansionEntry> snapshot() const {
    std::lock_guard lock(mutex_);
    return entries_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<ExpansionEntry> entries_;
};

struct Assignment {
  int thread = 0;
  ExpansionEntry entry;
};

struct DrainResult {
  std::vector<Assignment> assignments;
  std::size_t reinserted = 0;
  std::size_t dropped = 0;
};

/// Uniform-depth work tree over the domain's bounding box, stored as an
/// implicit grid of 2^depth cells per axis.
template <int D>
class WorkTree {
 public:
  static constexpr int max_neighbors = [] {
    int n = 1;
    for (int i = 0; i < D; ++i) n *= 3;
    return n - 1;
  }();

  /// Picks the smallest depth at which every cell meeting the domain has an
  /// estimated point count of at most `leaf_limit`. Depth is capped so that a
  /// cell is at least two spacings wide, which keeps candidates inside the Moore
  /// neighborhood and gives separated threads disjoint spatial leaves.
  static std::unique_ptr<WorkTree> build(const Domain<D>& domain, const Spacing<D>& spacing, std::size_t leaf_limit,
                                         int spatial_max_depth = 20) {
    if (leaf_limit < 1) throw std::invalid_argument("work leaf limit must be at least 1");
    const Box<D>& root = domain.bounding_box();
    const int depth_cap = spatial_max_depth - 1;
    const double h_max = spacing.max_in(root);
    double min_side = root.hi[0] - root.lo[0];
    for (int i = 1; i < D; ++i) min_side = std::min(min_side, root.hi[i] - root.lo[i]);
    int separation_cap = 0;
    while (std::ldexp(min_side, -(separation_cap + 1)) >= 2.0 * h_max) ++separation_cap;

    int depth = 0;
    bool capped = false;
    for (;; ++depth) {
      if (depth > depth_cap)
        throw DepthLimitError("work tree depth would exceed " + std::to_string(depth_cap));
      if (max_estimate(domain, spacing, depth) <= static_cast<double>(leaf_limit)) break;
      if (depth >= separation_cap) {
        capped = true;
        break;
      }
    }
    auto tree = std::unique_ptr<WorkTree>(new WorkTree(domain, depth, leaf_limit));
    tree->separation_capped_ = capped;
    return tree;
  }

  WorkTree(const WorkTree&) = delete;
  WorkTree& operator=(const WorkTree&) = delete;

  int depth() const noexcept { return depth_; }
  std::size_t leaf_limit() const noexcept { return leaf_limit_; }
  /// True when the separation cap, not the leaf limit, fixed the depth.
  bool separation_capped() const noexcept { return separation_capped_; }
  std::uint32_t cells_per_axis() const noexcept { return std::uint32_t{1} << depth_; }
  std::size_t size() const noexcept { return size_; }
  const Box<D>& root_box() const noexcept { return root_; }

  GridCoords<D> coords(std::int32_t cell) const noexcept { return grid_coords<D>(static_cast<std::size_t>(cell), depth_); }
  std::int32_t index(const GridCoords<D>& c) const noexcept { return static_cast<std::int32_t>(linear_index<D>(c, depth_)); }
  Box<D> cell_box(std::int32_t cell) const noexcept { return subdivision_box<D>(root_, depth_, coords(cell)); }

  /// Cell containing `p` by direct box arithmetic (floor of the scaled offset).
  std::int32_t cell_of(const Point<D>& p) const noexcept {
    GridCoords<D> c;
    const double n = static_cast<double>(cells_per_axis());
    for (int i = 0; i < D; ++i) {
      const double t = std::floor((p[i] - root_.lo[i]) / (root_.hi[i] - root_.lo[i]) * n);
      c[i] = static_cast<std::uint32_t>(std::clamp(t, 0.0, n - 1.0));
    }
    return index(c);
  }

  bool inert(std::int32_t cell) const noexcept { return cells_[static_cast<std::size_t>(cell)].inert; }
  std::size_t active_cells() const noexcept { return active_; }

  WorkCell& cell(std::int32_t i) noexcept { return cells_[static_cast<std::size_t>(i)]; }
  const WorkCell& cell(std::int32_t i) const noexcept { return cells_[static_cast<std::size_t>(i)]; }

  /// Calls `fn(neighbor)` for every Moore neighbor of `cell` inside the grid.
  template <class Fn>
  void for_each_neighbor(std::int32_t cell, Fn&& fn) const {
    const GridCoords<D> c = coords(cell);
    const auto n = static_cast<std::int64_t>(cells_per_axis());
    std::array<int, D> off;
    off.fill(-1);
    for (;;) {
      bool self = true;
      bool inside = true;
      GridCoords<D> q;
      for (int i = 0; i < D; ++i) {
        const std::int64_t v = static_cast<std::int64_t>(c[i]) + off[i];
        if (v < 0 || v >= n) inside = false;
        if (off[i] != 0) self = false;
        q[i] = static_cast<std::uint32_t>(v);
      }
      if (inside && !self) fn(index(q));
      int axis = 0;
      while (axis < D && off[axis] == 1) off[axis++] = -1;
      if (axis == D) break;
      ++off[axis];
    }
  }

  std::vector<std::int32_t> neighbors(std::int32_t cell) const {
    std::vector<std::int32_t> out;
    out.reserve(max_neighbors);
    for_each_neighbor(cell, [&](std::int32_t j) { out.push_back(j); });
    return out;
  }

  bool adjacent(std::int32_t a, std::int32_t b) const noexcept {
    if (a == b) return false;
    const GridCoords<D> ca = coords(a), cb = coords(b);
    for (int i = 0; i < D; ++i) {
      const auto d = static_cast<std::int64_t>(ca[i]) - static_cast<std::int64_t>(cb[i]);
      if (d < -1 || d > 1) return false;
    }
    return true;
  }

  CellState state(std::int32_t i) const noexcept {
    const WorkCell& c = cell(i);
    const bool attempt = c.attempt_owner.load(std::memory_order_acquire) >= 0;
    const bool locked = (c.claim_word.load(std::memory_order_acquire) & 0xffffffffu) != 0;
    const bool enq = c.enqueued.load(std::memory_order_acquire);
    return decode_cell_state(attempt, locked, enq).value_or(CellState::claimed);
  }

  /// Thread holding the lock on `i`, or -1.
  int owner(std::int32_t i) const noexcept {
    const std::uint64_t w = cell(i).claim_word.load(std::memory_order_acquire);
    return static_cast<int>(w & 0xffffffffu) - 1;
  }

  bool held_by(std::int32_t i, int thread_id) const noexcept { return owner(i) == thread_id; }

  /// Dekker-style claim. The lock-attempt test-and-set and the neighbor flag
  /// reads are sequentially consistent: of two threads racing for adjacent
  /// cells at least one sees the other's flag.
  ClaimOutcome try_claim(std::int32_t i, int thread_id) {
    ClaimOutcome out = claim_impl(i, thread_id);
    if (log_ != nullptr) log_->record(thread_id, i, out.claimed ? Transition::claim : Transition::conflict);
    return out;
  }

  /// Unlocks a held cell, then promotes every failed claim of this thread that
  /// neighbors it to the enqueued state. Promoted cells are removed from `failed`.
  void release(std::int32_t i, int thread_id, std::vector<std::int32_t>& failed) {
    WorkCell& c = cell(i);
    assert(held_by(i, thread_id));
    assert(c.front_count == 0);
    const std::uint64_t w = c.claim_word.load(std::memory_order_relaxed);
    c.claim_word.store(((w >> 32) + 1) << 32, std::memory_order_release);
    c.enqueued.store(false, std::memory_order_release);
    c.attempt_owner.store(-1, std::memory_order_release);
    if (log_ != nullptr) log_->record(thread_id, i, Transition::release);
    std::erase_if(failed, [&](std::int32_t f) {
      if (!adjacent(i, f)) return false;
      promote(f, thread_id);
      return true;
    });
  }

  /// Promotes all remaining failed claims (stage end).
  void release_failed(int thread_id, std::vector<std::int32_t>& failed) {
    for (std::int32_t f : failed) promote(f, thread_id);
    failed.clear();
  }

  std::int32_t adjust_front_count(std::int32_t i, std::int32_t delta) noexcept {
    WorkCell& c = cell(i);
    c.front_count += delta;
    assert(c.front_count >= 0);
    return c.front_count;
  }

  /// Stage boundary: shuffles the queued entries, drops stale or duplicate
  /// cells, and claims at most one enqueued cell per thread. Entries that could
  /// not be claimed go back on the queue. Requires quiescent workers.
  DrainResult restart_drain_stage(RestartQueue& queue, int threads, RandomStream& rng) {
    std::vector<ExpansionEntry> entries = queue.take_all();
    for (std::size_t k = entries.size(); k > 1; --k) std::swap(entries[k - 1], entries[rng.below(k)]);

    DrainResult out;
    std::unordered_set<std::int32_t> seen;
    const int log_thread = log_ != nullptr ? log_->coordinator() : 0;
    for (const ExpansionEntry& e : entries) {
      if (state(e.cell_index) != CellState::enqueued || !seen.insert(e.cell_index).second) {
        ++out.dropped;
        continue;
      }
      if (static_cast<int>(out.assignments.size()) < threads) {
        const int t = static_cast<int>(out.assignments.size());
        const ClaimOutcome c = claim_impl(e.cell_index, t);
        if (c.claimed) {
          out.assignments.push_back({t, e});
          if (log_ != nullptr) log_->record(log_thread, e.cell_index, Transition::drain_claim);
          continue;
        }
        WorkCell& wc = cell(e.cell_index);
        wc.enqueued.store(true, std::memory_order_relaxed);
        wc.attempt_owner.store(-1, std::memory_order_release);
      }
      queue.push(e);
      ++out.reinserted;
      if (log_ != nullptr) log_->record(log_thread, e.cell_index, Transition::drain_defer);
    }
    return out;
  }

  void set_event_log(EventLog* log) noexcept { log_ = log; }
  EventLog* event_log() const noexcept { return log_; }

  /// Cross-links work cells with their spatial nodes.
  void link_spatial(const SpatialTree<D>& tree) {
    if (tree.work_depth() != depth_ || tree.work_cell_nodes().size() != size_)
      throw std::invalid_argument("spatial tree was not prebuilt for this work tree");
    for (std::size_t i = 0; i < size_; ++i) cells_[i].spatial_node = tree.work_cell_nodes()[i];
  }

 private:
  WorkTree(const Domain<D>& domain, int depth, std::size_t leaf_limit)
      : root_(domain.bounding_box()),
        depth_(depth),
        leaf_limit_(leaf_limit),
        size_(std::size_t{1} << (D * depth)),
        cells_(new WorkCell[size_]) {
    for (std::size_t i = 0; i < size_; ++i) {
      cells_[i].inert = domain.disjoint_from(cell_box(static_cast<std::int32_t>(i)));
      if (!cells_[i].inert) ++active_;
    }
  }

  static double max_estimate(const Domain<D>& domain, const Spacing<D>& spacing, int depth) {
    const Box<D>& root = domain.bounding_box();
    const std::size_t n = std::size_t{1} << (D * depth);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Box<D> b = subdivision_box<D>(root, depth, grid_coords<D>(i, depth));
      if (domain.disjoint_from(b)) continue;
      worst = std::max(worst, estimate_count<D>(b, spacing));
      if (spacing.kind() == Spacing<D>::Kind::constant) break;
    }
    return worst;
  }

  ClaimOutcome claim_impl(std::int32_t i, int thread_id) {
    WorkCell& c = cell(i);
    ClaimOutcome out;
    if (c.inert) return out;
    std::int32_t expected = -1;
    if (!c.attempt_owner.compare_exchange_strong(expected, thread_id, std::memory_order_seq_cst)) {
      out.won_enqueue = !c.enqueued.exchange(true, std::memory_order_acq_rel);
      return out;
    }
    bool conflict = false;
    for_each_neighbor(i, [&](std::int32_t j) {
      const std::int32_t o = cells_[static_cast<std::size_t>(j)].attempt_owner.load(std::memory_order_seq_cst);
      if (o >= 0 && o != thread_id) conflict = true;
    });
    if (conflict) {
      out.holds_attempt = true;
      out.won_enqueue = !c.enqueued.exchange(true, std::memory_order_acq_rel);
      return out;
    }
    out.claimed = true;
    out.was_enqueued = c.enqueued.exchange(false, std::memory_order_acq_rel);
    c.front_count = 0;
    const std::uint64_t w = c.claim_word.load(std::memory_order_relaxed);
    c.claim_word.store((((w >> 32) + 1) << 32) | static_cast<std::uint32_t>(thread_id + 1), std::memory_order_release);
    return out;
  }

  void promote(std::int32_t f, int thread_id) {
    WorkCell& c = cell(f);
    assert(c.attempt_owner.load(std::memory_order_relaxed) == thread_id);
    c.enqueued.store(true, std::memory_order_relaxed);
    c.attempt_owner.store(-1, std::memory_order_release);
    if (log_ != nullptr) log_->record(thread_id, f, Transition::promote);
  }

  Box<D> root_;
  int depth_;
  std::size_t leaf_limit_;
  std::size_t size_;
  std::size_t active_ = 0;
  bool separation_capped_ = false;
  std::unique_ptr<WorkCell[]> cells_;
  EventLog* log_ = nullptr;
};

}  // namespace hyperfill
