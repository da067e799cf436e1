#pragma once

#include <array>
#include <atomic>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hyperfill/arena.hpp"
#include "hyperfill/geometry.hpp"
#include "hyperfill/grid.hpp"

namespace hyperfill {

/// Thrown when a tree would need more levels than its configured cap.
class DepthLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct SpatialOptions {
  int leaf_capacity = 40;
  int max_depth = 20;
  /// Record overlapping writers per leaf (instrumentation for separation tests).
  bool track_writers = false;
};

/// 2^d-ary hypertree over a bounding box holding indices into an append-only
/// point store.
///
/// There are no locks. Concurrent inserts are only safe when they target
/// distinct leaves, which the work-tree protocol guarantees. Readers may run
/// alongside writers: a leaf publishes its point count with release ordering
/// after the slot and the point coordinates are written, and a split
/// publishes the child block only after the children are fully populated.
/// A leaf's slots are never cleared, so a reader racing a split still sees a
/// consistent (if stale) snapshot.
template <int D>
class SpatialTree {
  static_assert(D >= 1 && D <= 4, "traversal stacks are sized for d <= 4");

 public:
  static constexpr int fanout = 1 << D;

  struct Node {
    Box<D> box{};
    Point<D> mid{};
    GridCoords<D> coords{};
    int depth = 0;
    std::int32_t work_cell = -1;
    std::atomic<std::int32_t> first_child{-1};
    std::atomic<std::int32_t> count{0};
    std::atomic<std::int64_t> slots{-1};
    std::atomic<std::int32_t> writer{-1};

    bool is_leaf() const noexcept { return first_child.load(std::memory_order_acquire) < 0; }
  };

  struct InsertResult {
    std::size_t point_index;
    std::int32_t work_cell;
  };

  /// Builds the skeleton: every node down to `work_depth` is internal, nodes
  /// at `work_depth` are cross-linked to work cells, and one further level of
  /// empty leaves sits below them.
  SpatialTree(const Box<D>& root_box, int work_depth, SpatialOptions options = {})
      : options_(options),
        root_box_(root_box),
        work_depth_(work_depth),
        slots_(16, std::size_t{1} << 16),
        points_(16, std::size_t{1} << 15) {
    if (options_.leaf_capacity < 1 || options_.leaf_capacity > (1 << 16))
      throw std::invalid_argument("leaf capacity must be in [1, 65536]");
    if (work_depth < 0) throw std::invalid_argument("work tree depth must be non-negative");
    if (work_depth + 1 > options_.max_depth)
      throw DepthLimitError("prebuilt depth " + std::to_string(work_depth + 1) + " exceeds maximum " +
                            std::to_string(options_.max_depth));
    const std::size_t root = nodes_.allocate(1);
    init_node(nodes_[root], 0, GridCoords<D>{});
    work_cell_nodes_.assign(std::size_t{1} << (D * work_depth), -1);
    prebuild(static_cast<std::int32_t>(root));
  }

  SpatialTree(const SpatialTree&) = delete;
  SpatialTree& operator=(const SpatialTree&) = delete;

  const SpatialOptions& options() const noexcept { return options_; }
  const Box<D>& root_box() const noexcept { return root_box_; }
  int work_depth() const noexcept { return work_depth_; }

  static constexpr std::int32_t root() noexcept { return 0; }
  const Node& node(std::int32_t i) const noexcept { return nodes_[static_cast<std::size_t>(i)]; }

  /// Spatial node cross-linked to each work cell, indexed by work cell.
  const std::vector<std::int32_t>& work_cell_nodes() const noexcept { return work_cell_nodes_; }

  /// Appends `p` to the point store and files it in its leaf, splitting full
  /// leaves. The caller must hold insertion rights to the target leaf.
  InsertResult insert(const Point<D>& p, int thread_id = 0) {
    if (!root_box_.contains_closed(p)) throw std::out_of_range("point outside the spatial tree root box");
    const std::size_t idx = points_.allocate(1);
    points_[idx] = p;

    std::int32_t cell = -1;
    std::int32_t cur = root();
    for (;;) {
      Node& n = nodes_[static_cast<std::size_t>(cur)];
      if (n.work_cell >= 0) cell = n.work_cell;
      const std::int32_t fc = n.first_child.load(std::memory_order_acquire);
      if (fc >= 0) {
        cur = fc + child_slot(n, p);
        continue;
      }
      if (options_.track_writers) enter_leaf(n, thread_id);
      const std::int32_t c = n.count.load(std::memory_order_relaxed);
      if (c < options_.leaf_capacity) {
        append(n, static_cast<std::int32_t>(idx));
        if (options_.track_writers) n.writer.store(-1, std::memory_order_release);
        return {idx, cell};
      }
      split(n);
      if (options_.track_writers) n.writer.store(-1, std::memory_order_release);
    }
  }

  /// Work cell whose box contains `p`, found by the same descent `insert` uses.
  std::int32_t locate_cell(const Point<D>& p) const noexcept {
    std::int32_t cur = root();
    for (;;) {
      const Node& n = node(cur);
      if (n.work_cell >= 0) return n.work_cell;
      const std::int32_t fc = n.first_child.load(std::memory_order_acquire);
      if (fc < 0) return -1;
      cur = fc + child_slot(n, p);
    }
  }

  /// True iff some stored point lies strictly closer than `radius` to `center`.
  bool has_point_within(const Point<D>& center, double radius) const {
    return has_point_within(center, radius, [](const Point<D>&, double) { return true; });
  }

  /// As above, counting only points q with `blocks(q, squared distance)`.
  template <class Pred>
  bool has_point_within(const Point<D>& center, double radius, Pred&& blocks) const {
    const double r2 = radius * radius;
    std::array<std::int32_t, 8 * 64> stack;
    std::size_t top = 0;
    stack[top++] = root();
    while (top > 0) {
      const Node& n = nodes_[static_cast<std::size_t>(stack[--top])];
      if (n.box.squared_distance_to(center) >= r2) continue;
      const std::int32_t fc = n.first_child.load(std::memory_order_acquire);
      if (fc >= 0) {
        for (int k = 0; k < fanout; ++k) stack[top++] = fc + k;
        continue;
      }
      const std::int32_t c = n.count.load(std::memory_order_acquire);
      if (c == 0) continue;
      const std::int32_t* s = &slots_[static_cast<std::size_t>(n.slots.load(std::memory_order_relaxed))];
      for (std::int32_t k = 0; k < c; ++k) {
        const Point<D>& q = points_[static_cast<std::size_t>(s[k])];
        const double d2 = squared_distance<D>(q, center);
        if (d2 < r2 && blocks(q, d2)) return true;
      }
    }
    return false;
  }

  /// Calls `fn(point_index)` for every point stored under `node_index`.
  template <class Fn>
  void for_each_point_under(std::int32_t node_index, Fn&& fn) const {
    std::array<std::int32_t, 8 * 64> stack;
    std::size_t top = 0;
    stack[top++] = node_index;
    while (top > 0) {
      const Node& n = nodes_[static_cast<std::size_t>(stack[--top])];
      const std::int32_t fc = n.first_child.load(std::memory_order_acquire);
      if (fc >= 0) {
        for (int k = fanout - 1; k >= 0; --k) stack[top++] = fc + k;
        continue;
      }
      const std::int32_t c = n.count.load(std::memory_order_acquire);
      if (c == 0) continue;
      const std::int32_t* s = &slots_[static_cast<std::size_t>(n.slots.load(std::memory_order_relaxed))];
      for (std::int32_t k = 0; k < c; ++k) fn(static_cast<std::size_t>(s[k]));
    }
  }

  /// Calls `fn(node_index, node)` for every current leaf, depth first.
  template <class Fn>
  void for_each_leaf(Fn&& fn) const {
    std::vector<std::int32_t> stack{root()};
    while (!stack.empty()) {
      const std::int32_t i = stack.back();
      stack.pop_back();
      const Node& n = node(i);
      const std::int32_t fc = n.first_child.load(std::memory_order_acquire);
      if (fc < 0) {
        fn(i, n);
        continue;
      }
      for (int k = fanout - 1; k >= 0; --k) stack.push_back(fc + k);
    }
  }

  /// Point indices held directly by a leaf.
  std::vector<std::size_t> leaf_points(const Node& n) const {
    std::vector<std::size_t> out;
    const std::int32_t c = n.count.load(std::memory_order_acquire);
    if (c == 0) return out;
    const std::int32_t* s = &slots_[static_cast<std::size_t>(n.slots.load(std::memory_order_relaxed))];
    out.assign(s, s + c);
    return out;
  }

  std::size_t count() const noexcept { return points_.extent(); }
  const Point<D>& point(std::size_t i) const noexcept { return points_[i]; }

  /// Copies all points in index order.
  std::vector<Point<D>> all_points() const {
    std::vector<Point<D>> out(count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = points_[i];
    return out;
  }

  /// Number of times two threads were seen inside the same leaf at once.
  std::size_t writer_overlaps() const noexcept { return writer_overlaps_.load(std::memory_order_relaxed); }

 private:
  void init_node(Node& n, int depth, const GridCoords<D>& coords) {
    n.depth = depth;
    n.coords = coords;
    n.box = subdivision_box<D>(root_box_, depth, coords);
    for (int i = 0; i < D; ++i)
      n.mid[i] = subdivision_coordinate(root_box_.lo[i], root_box_.hi[i], depth + 1, std::uint64_t{coords[i]} * 2 + 1);
    n.work_cell = -1;
    n.first_child.store(-1, std::memory_order_relaxed);
    n.count.store(0, std::memory_order_relaxed);
    n.slots.store(-1, std::memory_order_relaxed);
    n.writer.store(-1, std::memory_order_relaxed);
  }

  int child_slot(const Node& n, const Point<D>& p) const noexcept {
    int k = 0;
    for (int i = 0; i < D; ++i)
      if (p[i] >= n.mid[i]) k |= 1 << i;
    return k;
  }

  /// Allocates and initializes the children of `n` without publishing them.
  std::int32_t make_children(Node& n) {
    const std::size_t base = nodes_.allocate(fanout);
    for (int k = 0; k < fanout; ++k) {
      GridCoords<D> c;
      for (int i = 0; i < D; ++i) c[i] = n.coords[i] * 2 + ((k >> i) & 1);
      init_node(nodes_[base + static_cast<std::size_t>(k)], n.depth + 1, c);
    }
    return static_cast<std::int32_t>(base);
  }

  void prebuild(std::int32_t index) {
    Node& n = nodes_[static_cast<std::size_t>(index)];
    if (n.depth == work_depth_) {
      const auto cell = static_cast<std::int32_t>(linear_index<D>(n.coords, work_depth_));
      n.work_cell = cell;
      work_cell_nodes_[static_cast<std::size_t>(cell)] = index;
    }
    if (n.depth > work_depth_) return;
    const std::int32_t base = make_children(n);
    n.first_child.store(base, std::memory_order_release);
    for (int k = 0; k < fanout; ++k) prebuild(base + k);
  }

  void append(Node& n, std::int32_t point_index) {
    const std::int32_t c = n.count.load(std::memory_order_relaxed);
    std::int64_t s = n.slots.load(std::memory_order_relaxed);
    if (s < 0) {
      s = static_cast<std::int64_t>(slots_.allocate(static_cast<std::size_t>(options_.leaf_capacity)));
      n.slots.store(s, std::memory_order_relaxed);
    }
    slots_[static_cast<std::size_t>(s) + static_cast<std::size_t>(c)] = point_index;
    n.count.store(c + 1, std::memory_order_release);
  }

  void split(Node& n) {
    if (n.depth + 1 > options_.max_depth)
      throw DepthLimitError("spatial leaf split would exceed depth " + std::to_string(options_.max_depth));
    const std::int32_t base = make_children(n);
    const std::int32_t c = n.count.load(std::memory_order_relaxed);
    const std::int32_t* s = &slots_[static_cast<std::size_t>(n.slots.load(std::memory_order_relaxed))];
    for (std::int32_t k = 0; k < c; ++k) {
      const auto pi = static_cast<std::size_t>(s[k]);
      Node& child = nodes_[static_cast<std::size_t>(base + child_slot(n, points_[pi]))];
      append(child, s[k]);
    }
    n.first_child.store(base, std::memory_order_release);
  }

  void enter_leaf(Node& n, int thread_id) {
    const std::int32_t prev = n.writer.exchange(thread_id, std::memory_order_acq_rel);
    if (prev >= 0 && prev != thread_id) writer_overlaps_.fetch_add(1, std::memory_order_relaxed);
  }

  SpatialOptions options_;
  Box<D> root_box_;
  int work_depth_;
  ConcurrentArena<Node> nodes_;
  ConcurrentArena<std::int32_t> slots_;
  ConcurrentArena<Point<D>> points_;
  std::vector<std::int32_t> work_cell_nodes_;
  std::atomic<std::size_t> writer_overlaps_{0};
};

}  // namespace hyperfill
