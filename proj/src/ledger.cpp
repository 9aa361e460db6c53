#include "tcl/ledger.hpp"

#include <algorithm>

namespace tcl {

void PowerEventLedger::insert(const PowerEvent& e) {
  if (events_.empty() || !event_before(e, events_.back())) {
    events_.push_back(e);
    return;
  }
  auto pos = std::upper_bound(events_.begin(), events_.end(), e, event_before);
  events_.insert(pos, e);
}

void PowerEventLedger::merge(std::vector<PowerEvent> batch) {
  if (batch.empty()) return;
  std::sort(batch.begin(), batch.end(), event_before);
  const auto mid = static_cast<std::ptrdiff_t>(events_.size());
  events_.insert(events_.end(), batch.begin(), batch.end());
  if (mid > 0 && event_before(events_[mid], events_[mid - 1])) {
    std::inplace_merge(events_.begin(), events_.begin() + mid, events_.end(),
                       event_before);
  }
}

std::span<const PowerEvent> PowerEventLedger::window(double t0, double t1) const {
  auto lo = std::lower_bound(
      events_.begin(), events_.end(), t0,
      [](const PowerEvent& e, double t) { return e.time < t; });
  auto hi = std::lower_bound(
      lo, events_.end(), t1,
      [](const PowerEvent& e, double t) { return e.time < t; });
  return {lo, hi};
}

}  // namespace tcl
