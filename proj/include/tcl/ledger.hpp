#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tcl {

enum class Direction : std::int8_t { down = -1, up = 1 };

/// One change of the aggregate power, caused by exactly one device switch.
struct PowerEvent {
  double time = 0.0;      // hours
  double delta_kw = 0.0;  // signed change of aggregate draw
  Direction direction = Direction::up;
  bool enforced = false;  // came from a scheduled (protocol) toggle
  // Simulation-internal insertion key. Orders simultaneous events and lets a
  // device recognise its own switches; never used to identify other devices.
  std::uint32_t source = 0;
  std::uint32_t seq = 0;
};

/// Total order used by the ledger: timestamp, then insertion key.
inline bool event_before(const PowerEvent& a, const PowerEvent& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.source != b.source) return a.source < b.source;
  return a.seq < b.seq;
}

/// Globally observable, time-ordered record of aggregate power changes.
class PowerEventLedger {
 public:
  /// Inserts keeping the order; O(1) when appending at the tail.
  void insert(const PowerEvent& e);

  /// Sorts `batch` and merges it in.
  void merge(std::vector<PowerEvent> batch);

  std::span<const PowerEvent> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  /// Events with t0 <= time < t1.
  std::span<const PowerEvent> window(double t0, double t1) const;

 private:
  std::vector<PowerEvent> events_;
};

}  // namespace tcl
