#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>

#include "tcl/ledger.hpp"
#include "tcl/thermostat.hpp"

// Per-device desynchronisation protocol. A device reacts to a setpoint
// broadcast by narrowing its band by a random amount that then decays, and
// by toggling its status once per period at a scheduled phase. The phase is
// re-centred every period between the nearest foreign transitions seen in
// the aggregate-power event ledger. Inputs are restricted to the device's
// own state, the broadcast and ledger timestamps.

namespace tcl {

/// Which ledger events a device treats as neighbour transitions.
enum class ObservationPolicy { all_events, same_direction, enforced_only };

/// Where a device gets its period length from.
enum class PeriodMode {
  a_priori,  // closed-form natural cycle of the device's own parameters
  measured,  // last complete on-leg plus last complete off-leg
};

struct ProtocolSettings {
  double decay_rate = 1.0;  // a, 1/h
  ObservationPolicy observation = ObservationPolicy::all_events;
  PeriodMode period_mode = PeriodMode::a_priori;
};

/// Tracks the durations of the device's own uninterrupted hysteresis legs.
struct PeriodEstimator {
  std::optional<double> last_on_leg;
  std::optional<double> last_off_leg;
  std::optional<double> leg_start;  // time of the last natural switch
  bool leg_clean = false;           // no enforced toggle since leg_start

  void record_natural(double time, bool now_on);
  void record_enforced() { leg_clean = false; }
  std::optional<double> estimate() const;
};

struct ProtocolState {
  bool engaged = false;  // set by the first broadcast
  double alpha = 0.0;    // band narrowing, degC
  double decay_rate = 1.0;
  double t_enforced = 0.0;    // phase of the enforced switch, [0, period)
  double period = 0.0;        // hours
  double period_start = 0.0;  // absolute start of the current period
  std::optional<double> t_prev;
  std::optional<double> t_next;
  bool is_anchor = false;
  bool fired = false;    // enforced switch handled this period
  bool toggled = false;  // ... and actually changed the status
  Direction enforced_direction = Direction::up;
  bool anchor_seen = false;  // a foreign transition sat exactly on phase 0
  std::uint32_t periods_completed = 0;
  PeriodEstimator estimator;

  double phase_clock(double now) const { return now - period_start; }
  double enforced_time() const { return period_start + t_enforced; }
  double period_end() const { return period_start + period; }
};

/// Thresholds the device currently switches on.
Band effective_band(const TclParameters& params, const ProtocolState& state);

struct BroadcastDraws {
  double alpha = 0.0;       // in [0, deadband/2)
  double t_enforced = 0.0;  // in [0, period)
};

BroadcastDraws draw_broadcast(double deadband, double period,
                              std::mt19937_64& rng);

/// Applies a setpoint step of `delta` at absolute time `now` and restarts the
/// protocol with the given draws. `period` is the period the device will use.
std::pair<ProtocolState, TclParameters> on_broadcast(
    const ProtocolState& state, const TclParameters& params, double delta,
    double now, double period, const BroadcastDraws& draws);

std::pair<ProtocolState, TclParameters> on_broadcast(
    const ProtocolState& state, const TclParameters& params, double delta,
    double now, double period, std::mt19937_64& rng);

/// alpha <- alpha * exp(-a dt).
ProtocolState decay_alpha(const ProtocolState& state, double dt);

/// The device's own switch the neighbours are located around.
struct OwnSwitch {
  double time = 0.0;  // absolute
  std::uint32_t source = 0;
  std::uint32_t seq = UINT32_MAX;  // ledger key of the own event, if any
  Direction direction = Direction::up;
};

struct NeighborObservation {
  // Phases relative to the period start. `prev` may be negative (previous
  // period) and `next` may exceed the period (wrapped first transition).
  std::optional<double> prev;
  std::optional<double> next;
  bool first_in_cycle = false;  // nothing foreign before the own switch
  bool empty = false;           // nothing foreign in the whole period
  bool beacon = false;          // a foreign transition exactly at phase 0
};

/// Locates the nearest foreign transitions around `own` within the period
/// starting at `period_start`. `ledger` must be ordered by event_before.
NeighborObservation observe_neighbors(std::span<const PowerEvent> ledger,
                                      const OwnSwitch& own, double period_start,
                                      double period, ObservationPolicy policy);

/// Midpoint of the neighbour transitions, reduced into [0, period).
double update_timing(double t_prev, double t_next, double period);

ProtocolState declare_anchor(const ProtocolState& state);

struct EnforcedOutcome {
  bool toggled = false;
  bool skipped = false;  // toggling would have pushed the device out of band
};

/// Toggles the status unless that would immediately drive the temperature
/// out of the comfort band. Marks the period's enforced switch as handled.
EnforcedOutcome enforced_switch(ThermostatState& thermo, ProtocolState& proto,
                                Mode mode = Mode::cooling);

/// Period-end bookkeeping: applies the timing update (or anchoring) from the
/// observation, then starts the next period with length `next_period`.
void complete_period(ProtocolState& state, const NeighborObservation& obs,
                     double next_period);

}  // namespace tcl
