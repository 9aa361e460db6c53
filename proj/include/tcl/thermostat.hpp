#pragma once

// Single-device dynamics of a thermostatically controlled load (TCL):
// first-order thermal model, hysteretic on/off switching and the
// closed-form limit-cycle timings that follow from them.
//
// Units are hours, degrees Celsius and kW throughout.

namespace tcl {

enum class Mode { cooling, heating };

struct Band {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double theta, double tol = 0.0) const {
    return theta >= lo - tol && theta <= hi + tol;
  }
};

struct TclParameters {
  double resistance = 2.0;   // R, degC/kW
  double capacitance = 5.0;  // C, kWh/degC
  double power = 14.0;       // P, thermal kW when on
  double cop = 2.5;          // eta
  double setpoint = 20.0;    // degC
  double deadband = 1.0;     // full band width, degC
  double ambient = 28.0;     // degC
  Mode mode = Mode::cooling;

  double time_constant() const { return resistance * capacitance; }

  /// Temperature the device relaxes towards with the given on/off status.
  double equilibrium(bool on) const {
    if (!on) return ambient;
    const double drive = resistance * power;
    return mode == Mode::cooling ? ambient - drive : ambient + drive;
  }

  Band nominal_band() const;
};

/// Throws std::invalid_argument for non-positive constants and
/// std::domain_error when the nominal band does not admit a limit cycle.
void validate(const TclParameters& params);

/// True when both equilibria lie strictly outside `band` on opposite sides,
/// i.e. the device keeps cycling between the thresholds.
bool admits_cycle(const TclParameters& params, const Band& band);

struct ThermostatState {
  double theta = 0.0;
  bool on = false;
  Band band;
};

/// Effective switching thresholds for a band narrowed by `alpha` on each side.
/// Requires 0 <= alpha < deadband/2.
Band band_from_setpoint(double setpoint, double deadband, double alpha = 0.0);

/// Exact solution of the thermal ODE over `dt` hours with the status held.
/// Thresholds are not checked.
ThermostatState propagate_exact(const ThermostatState& state,
                                const TclParameters& params, double dt);

/// Temperature after `dt` hours of relaxation towards `equilibrium`.
double relax(double theta, double equilibrium, double tau, double dt);

/// Whether the hysteresis rule demands a toggle in the given state.
bool switch_due(const ThermostatState& state, Mode mode = Mode::cooling);

ThermostatState hysteresis_switch(const ThermostatState& state,
                                  Mode mode = Mode::cooling);

struct CycleTimes {
  double on = 0.0;      // hours spent on per cycle
  double off = 0.0;     // hours spent off per cycle
  double period = 0.0;  // on + off
  double duty = 0.0;    // on / period
};

/// Limit-cycle timings for the nominal (un-narrowed) band.
CycleTimes natural_cycle(const TclParameters& params);

/// Limit-cycle timings between arbitrary thresholds.
CycleTimes natural_cycle(const TclParameters& params, const Band& band);

/// Electrical draw P*s/eta in kW.
double electrical_power(const TclParameters& params, bool on);

}  // namespace tcl
