#include "hyperfill/event_log.hpp"

#include <algorithm>
#include <ostream>

namespace hyperfill {

std::string_view to_string(Transition t) noexcept {
  switch (t) {
    case Transition::claim: return "claim";
    case Transition::conflict: return "conflict";
    case Transition::restart_push: return "restart_push";
    case Transition::release: return "release";
    case Transition::promote: return "promote";
    case Transition::drain_claim: return "drain_claim";
    case Transition::drain_defer: return "drain_defer";
  }
  return "unknown";
}

EventLog::EventLog(int threads)
    : start_(std::chrono::steady_clock::now()), buffers_(static_cast<std::size_t>(threads) + 1) {}

std::vector<Event> EventLog::merged() const {
  std::vector<Event> all;
  for (const auto& b : buffers_) all.insert(all.end(), b.begin(), b.end());
  std::stable_sort(all.begin(), all.end(), [](const Event& a, const Event& b) {
    return a.time_ns != b.time_ns ? a.time_ns < b.time_ns : a.thread < b.thread;
  });
  return all;
}

void EventLog::write_csv(std::ostream& os) const {
  os << "time_ns,thread,cell,transition\n";
  for (const Event& e : merged()) os << e.time_ns << ',' << e.thread << ',' << e.cell << ',' << to_string(e.transition) << '\n';
}

}  // namespace hyperfill
