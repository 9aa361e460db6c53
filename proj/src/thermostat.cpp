#include "tcl/thermostat.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tcl {

Band TclParameters::nominal_band() const {
  return band_from_setpoint(setpoint, deadband, 0.0);
}

bool admits_cycle(const TclParameters& params, const Band& band) {
  if (!(band.lo < band.hi)) return false;
  const double eq_on = params.equilibrium(true);
  const double eq_off = params.equilibrium(false);
  if (params.mode == Mode::cooling) {
    return eq_on < band.lo && band.hi < eq_off;
  }
  return eq_off < band.lo && band.hi < eq_on;
}

void validate(const TclParameters& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::ostringstream msg;
      msg << name << " must be positive and finite (got " << v << ")";
      throw std::invalid_argument(msg.str());
    }
  };
  positive(p.resistance, "resistance");
  positive(p.capacitance, "capacitance");
  positive(p.power, "power");
  positive(p.cop, "cop");
  positive(p.deadband, "deadband");
  if (!std::isfinite(p.setpoint) || !std::isfinite(p.ambient)) {
    throw std::invalid_argument("setpoint and ambient must be finite");
  }
  if (!admits_cycle(p, p.nominal_band())) {
    std::ostringstream msg;
    const Band b = p.nominal_band();
    msg << "parameters do not admit a limit cycle: band [" << b.lo << ", "
        << b.hi << "] must lie strictly between the on-equilibrium "
        << p.equilibrium(true) << " and the ambient " << p.ambient;
    throw std::domain_error(msg.str());
  }
}

Band band_from_setpoint(double setpoint, double deadband, double alpha) {
  if (!(alpha >= 0.0) || !(alpha < deadband / 2.0)) {
    std::ostringstream msg;
    msg << "band narrowing " << alpha << " outside [0, " << deadband / 2.0
        << ")";
    throw std::invalid_argument(msg.str());
  }
  const Band b{setpoint - deadband / 2.0 + alpha, setpoint + deadband / 2.0 - alpha};
  if (!(b.lo < b.hi)) {
    throw std::invalid_argument("band narrowing leaves no room between thresholds");
  }
  return b;
}

double relax(double theta, double equilibrium, double tau, double dt) {
  return equilibrium + (theta - equilibrium) * std::exp(-dt / tau);
}

ThermostatState propagate_exact(const ThermostatState& state,
                                const TclParameters& params, double dt) {
  if (!(dt >= 0.0)) {
    throw std::invalid_argument("propagate_exact: negative time step");
  }
  ThermostatState next = state;
  if (dt > 0.0) {
    next.theta = relax(state.theta, params.equilibrium(state.on),
                       params.time_constant(), dt);
  }
  return next;
}

bool switch_due(const ThermostatState& s, Mode mode) {
  if (mode == Mode::cooling) {
    return s.on ? s.theta <= s.band.lo : s.theta >= s.band.hi;
  }
  return s.on ? s.theta >= s.band.hi : s.theta <= s.band.lo;
}

ThermostatState hysteresis_switch(const ThermostatState& state, Mode mode) {
  ThermostatState next = state;
  if (switch_due(state, mode)) next.on = !state.on;
  return next;
}

CycleTimes natural_cycle(const TclParameters& params) {
  return natural_cycle(params, params.nominal_band());
}

CycleTimes natural_cycle(const TclParameters& p, const Band& band) {
  if (!admits_cycle(p, band)) {
    throw std::domain_error("natural_cycle: parameters do not admit a cycle");
  }
  const double tau = p.time_constant();
  const double eq_on = p.equilibrium(true);
  const double eq_off = p.equilibrium(false);
  CycleTimes c;
  // Each leg is the time for the exponential flow to cross the band.
  c.on = tau * std::log((band.hi - eq_on) / (band.lo - eq_on));
  c.off = tau * std::log((eq_off - band.lo) / (eq_off - band.hi));
  if (p.mode == Mode::heating) {
    c.on = tau * std::log((eq_on - band.lo) / (eq_on - band.hi));
    c.off = tau * std::log((band.hi - eq_off) / (band.lo - eq_off));
  }
  c.period = c.on + c.off;
  c.duty = c.on / c.period;
  return c;
}

double electrical_power(const TclParameters& params, bool on) {
  return on ? params.power / params.cop : 0.0;
}

}  // namespace tcl
