#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace hyperfill {

enum class Transition : std::uint8_t {
  claim,         ///< Unclaimed/Enqueued -> Claimed
  conflict,      ///< claim attempt lost to a neighbor
  restart_push,  ///< entry pushed onto the restart queue
  release,       ///< Claimed -> Unclaimed
  promote,       ///< FailedClaim -> Enqueued
  drain_claim,   ///< claimed on behalf of a worker at a stage boundary
  drain_defer,   ///< restart entry put back for a later stage
};

std::string_view to_string(Transition t) noexcept;

struct Event {
  std::int64_t time_ns;
  std::int32_t thread;
  std::int32_t cell;
  Transition transition;
};

/// Work-tree transition log with one buffer per recording thread.
///
/// Buffer `i` must only ever be written by one thread at a time; the
/// coordinator uses buffer `threads`.
class EventLog {
 public:
  explicit EventLog(int threads);

  int coordinator() const noexcept { return static_cast<int>(buffers_.size()) - 1; }

  void record(int thread, std::int32_t cell, Transition t) {
    const auto now = std::chrono::steady_clock::now() - start_;
    buffers_[static_cast<std::size_t>(thread)].push_back(
        {std::chrono::duration_cast<std::chrono::nanoseconds>(now).count(), thread, cell, t});
  }

  /// All events ordered by time (ties by thread). Call when quiescent.
  std::vector<Event> merged() const;

  /// CSV with header `time_ns,thread,cell,transition`.
  void write_csv(std::ostream& os) const;

 private:
  std::chrono::steady_clock::time_point start_;
  std::vector<std::vector<Event>> buffers_;
};

}  // namespace hyperfill
