#include "tcl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcl {

void PeriodEstimator::record_natural(double time, bool now_on) {
  if (leg_start && leg_clean) {
    // The leg that just ended ran with the opposite status.
    const double leg = time - *leg_start;
    if (now_on) {
      last_off_leg = leg;
    } else {
      last_on_leg = leg;
    }
  }
  leg_start = time;
  leg_clean = true;
}

std::optional<double> PeriodEstimator::estimate() const {
  if (!last_on_leg || !last_off_leg) return std::nullopt;
  return *last_on_leg + *last_off_leg;
}

Band effective_band(const TclParameters& params, const ProtocolState& state) {
  return band_from_setpoint(params.setpoint, params.deadband, state.alpha);
}

namespace {

double draw_below(std::mt19937_64& rng, double upper) {
  std::uniform_real_distribution<double> u(0.0, upper);
  double v = u(rng);
  // uniform_real_distribution may round up to the open bound.
  if (v >= upper) v = std::nextafter(upper, 0.0);
  return v;
}

bool qualifies(const PowerEvent& e, const OwnSwitch& own,
               ObservationPolicy policy) {
  if (e.source == own.source) return false;
  switch (policy) {
    case ObservationPolicy::all_events:
      return true;
    case ObservationPolicy::same_direction:
      return e.direction == own.direction;
    case ObservationPolicy::enforced_only:
      return e.enforced;
  }
  return false;
}

}  // namespace

BroadcastDraws draw_broadcast(double deadband, double period,
                              std::mt19937_64& rng) {
  BroadcastDraws d;
  d.alpha = draw_below(rng, deadband / 2.0);
  d.t_enforced = draw_below(rng, period);
  return d;
}

std::pair<ProtocolState, TclParameters> on_broadcast(
    const ProtocolState& state, const TclParameters& params, double delta,
    double now, double period, const BroadcastDraws& draws) {
  if (!std::isfinite(delta)) {
    throw std::invalid_argument("on_broadcast: non-finite setpoint step");
  }
  if (!(period > 0.0)) throw std::invalid_argument("on_broadcast: period <= 0");
  if (!(draws.t_enforced >= 0.0 && draws.t_enforced < period)) {
    throw std::invalid_argument("on_broadcast: enforced phase outside [0, T)");
  }
  TclParameters p = params;
  p.setpoint += delta;
  // Throws for alpha outside [0, deadband/2).
  (void)band_from_setpoint(p.setpoint, p.deadband, draws.alpha);

  ProtocolState s;
  s.engaged = true;
  s.alpha = draws.alpha;
  s.decay_rate = state.decay_rate;
  s.t_enforced = draws.t_enforced;
  s.period = period;
  s.period_start = now;
  s.estimator = state.estimator;
  return {s, p};
}

std::pair<ProtocolState, TclParameters> on_broadcast(
    const ProtocolState& state, const TclParameters& params, double delta,
    double now, double period, std::mt19937_64& rng) {
  return on_broadcast(state, params, delta, now, period,
                      draw_broadcast(params.deadband, period, rng));
}

ProtocolState decay_alpha(const ProtocolState& state, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("decay_alpha: negative dt");
  ProtocolState s = state;
  s.alpha = state.alpha * std::exp(-state.decay_rate * dt);
  return s;
}

NeighborObservation observe_neighbors(std::span<const PowerEvent> ledger,
                                      const OwnSwitch& own, double period_start,
                                      double period, ObservationPolicy policy) {
  NeighborObservation obs;
  const double period_end = period_start + period;
  auto by_time = [](const PowerEvent& e, double t) { return e.time < t; };
  const auto begin = ledger.begin();
  const auto lower = std::lower_bound(begin, ledger.end(), period_start, by_time);
  const auto upper = std::lower_bound(lower, ledger.end(), period_end, by_time);

  PowerEvent own_key;
  own_key.time = own.time;
  own_key.source = own.source;
  own_key.seq = own.seq;
  const auto pos = std::partition_point(lower, upper, [&](const PowerEvent& e) {
    return event_before(e, own_key);
  });
  auto ok = [&](const PowerEvent& e) { return qualifies(e, own, policy); };

  for (auto it = lower; it != upper && it->time == period_start; ++it) {
    if (ok(*it)) {
      obs.beacon = true;
      break;
    }
  }

  // Last foreign transition before the own switch in this period.
  for (auto it = pos; it != lower;) {
    --it;
    if (ok(*it)) {
      obs.prev = it->time - period_start;
      break;
    }
  }
  // First foreign transition after it.
  for (auto it = pos; it != upper; ++it) {
    if (ok(*it)) {
      obs.next = it->time - period_start;
      break;
    }
  }

  if (!obs.prev && !obs.next) {
    obs.empty = true;
    return obs;
  }

  if (!obs.prev) {
    obs.first_in_cycle = true;
    // Tail of the previous period, as a negative phase.
    for (auto it = lower; it != begin;) {
      --it;
      if (it->time < period_start - period) break;
      if (ok(*it)) {
        obs.prev = it->time - period_start;
        break;
      }
    }
    // Nothing recorded there: assume the current period repeats.
    if (!obs.prev) {
      for (auto it = upper; it != pos;) {
        --it;
        if (ok(*it)) {
          obs.prev = it->time - period_start - period;
          break;
        }
      }
    }
  }
  if (!obs.next) {
    // The next period has not happened yet; wrap the first transition.
    for (auto it = lower; it != pos; ++it) {
      if (ok(*it)) {
        obs.next = it->time - period_start + period;
        break;
      }
    }
  }
  return obs;
}

double update_timing(double t_prev, double t_next, double period) {
  double t = std::fmod(0.5 * (t_prev + t_next), period);
  if (t < 0.0) t += period;
  if (t >= period) t = 0.0;
  return t;
}

ProtocolState declare_anchor(const ProtocolState& state) {
  ProtocolState s = state;
  s.is_anchor = true;
  s.t_enforced = 0.0;
  return s;
}

EnforcedOutcome enforced_switch(ThermostatState& thermo, ProtocolState& proto,
                                Mode mode) {
  EnforcedOutcome out;
  proto.fired = true;
  const bool turning_on = !thermo.on;
  proto.enforced_direction = turning_on ? Direction::up : Direction::down;
  // Cooling: switching on below the band or off above it would leave the
  // band at once. Heating mirrors that.
  bool violates = false;
  if (mode == Mode::cooling) {
    violates = turning_on ? thermo.theta <= thermo.band.lo
                          : thermo.theta >= thermo.band.hi;
  } else {
    violates = turning_on ? thermo.theta >= thermo.band.hi
                          : thermo.theta <= thermo.band.lo;
  }
  if (violates) {
    out.skipped = true;
    return out;
  }
  thermo.on = turning_on;
  proto.toggled = true;
  proto.estimator.record_enforced();
  out.toggled = true;
  return out;
}

void complete_period(ProtocolState& state, const NeighborObservation& obs,
                     double next_period) {
  // The first period starts with the broadcast itself, where every device
  // that overshoots the new band switches at phase 0; only later periods can
  // carry an anchor's mark.
  if (state.periods_completed > 0 && obs.beacon) state.anchor_seen = true;

  if (!state.is_anchor && !obs.empty) {
    state.t_prev = obs.prev;
    state.t_next = obs.next;
    if (obs.first_in_cycle && state.toggled && !state.anchor_seen) {
      state = declare_anchor(state);
    } else if (obs.prev && obs.next) {
      state.t_enforced = update_timing(*obs.prev, *obs.next, state.period);
    }
  }

  state.period_start += state.period;
  if (next_period > 0.0) state.period = next_period;
  if (state.is_anchor) {
    state.t_enforced = 0.0;
  } else if (state.t_enforced >= state.period) {
    state.t_enforced = std::fmod(state.t_enforced, state.period);
  }
  state.fired = false;
  state.toggled = false;
  ++state.periods_completed;
}

}  // namespace tcl
