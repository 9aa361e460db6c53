#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcl/ledger.hpp"
#include "tcl/protocol.hpp"
#include "tcl/thermostat.hpp"

namespace tcl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParamField { resistance, capacitance, power, cop, setpoint, deadband, ambient };

struct FieldDistribution {
  enum class Kind { normal, uniform };
  ParamField field = ParamField::capacitance;
  Kind kind = Kind::normal;
  double a = 0.0;  // mean (normal) or lower bound (uniform)
  double b = 0.0;  // standard deviation (normal) or upper bound (uniform)
  // Draws at or below this value are rejected and redrawn.
  std::optional<double> min_exclusive;
};

enum class InitialStatus { duty, all_off, all_on };

struct BroadcastEvent {
  double time = 0.0;            // hours
  double delta_setpoint = 0.0;  // degC
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint32_t n_devices = 1;
  TclParameters base_params;
  std::vector<FieldDistribution> heterogeneity;
  InitialStatus initial_status = InitialStatus::duty;
  std::vector<BroadcastEvent> broadcasts;
  double horizon = 30.0;
  double reporting_step = 1e-3;
  double event_tolerance = 1e-9;
  double order_parameter_step = 0.01;  // hours between order-parameter samples
  bool protocol_enabled = false;
  ProtocolSettings protocol;
  std::uint64_t seed = 1;
  std::uint32_t temperature_sample = 25;
  int workers = 1;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const ScenarioConfig& config);

struct Device {
  TclParameters params;
  ThermostatState thermo;
  ProtocolState proto;
  double time = 0.0;
  double last_on = 0.0;         // most recent switch-on, natural or enforced
  double natural_period = 0.0;  // closed-form period at the current setpoint
  Band comfort_hull;             // allowed range during the current transient
  bool settled = true;           // entered the current nominal band
  double max_excursion = 0.0;    // worst distance outside the allowed range
  std::uint32_t index = 0;
  std::uint32_t seq = 0;         // own event counter
  std::uint64_t switches = 0;
  std::mt19937_64 rng;
};

/// Deterministic stream for one device; distinct devices get unrelated streams.
std::mt19937_64 device_stream(std::uint64_t seed, std::uint32_t index);

/// Draws parameters, temperatures and statuses for every device.
std::vector<Device> sample_population(const ScenarioConfig& config);

struct TimingSnapshot {
  double time = 0.0;
  double period = 0.0;
  std::vector<double> timings;  // enforced phase per device
  std::vector<std::uint8_t> anchors;
};

struct SimulationTrace {
  std::vector<double> time;   // reporting grid, hours
  std::vector<double> power;  // aggregate kW on the grid
  std::vector<std::uint32_t> sampled_devices;
  std::vector<std::vector<double>> device_temps;  // [sample][grid index]
  std::vector<double> order_time;
  std::vector<double> order;  // order parameter samples
  PowerEventLedger ledger;
  std::vector<TimingSnapshot> timing_history;
  std::vector<Device> final_devices;
  double max_comfort_excursion = 0.0;  // degC, over all devices
};

SimulationTrace run(const ScenarioConfig& config);

/// Magnitude of the mean unit phasor of the phases (fractions of a cycle).
double order_parameter(std::span<const double> phases);

/// Time since the device's last switch-on as a fraction of its natural
/// period, reduced into [0, 1). This is the phase the order parameter uses.
double cycle_phase(const Device& device, double now);

std::vector<double> cycle_phases(std::span<const Device> devices, double now);

/// Position on the limit cycle of the device's current thresholds, measured
/// from the cycle's switch-on point. Equals cycle_phase for a device cycling
/// undisturbed, but ignores the extra switch-ons added by enforced toggles.
double limit_cycle_phase(const Device& device);

struct Amplitude {
  double peak = 0.0;
  double trough = 0.0;
  double peak_to_peak = 0.0;
  double std = 0.0;
  double mean = 0.0;
};

/// Statistics of the power samples with t_a <= t <= t_b.
Amplitude oscillation_amplitude(const SimulationTrace& trace, double t_a,
                                double t_b);

/// Order-parameter sample nearest to `t`.
double order_at(const SimulationTrace& trace, double t);

/// First grid time t >= t_start + window at which the power over
/// [t - window, t] has a standard deviation below `fraction` of its mean.
std::optional<double> settling_time(const SimulationTrace& trace, double t_start,
                                    double window, double fraction = 0.05);

/// Consecutive windows of one natural period of the base parameters, restarted
/// at each broadcast, covering [0, horizon].
std::vector<std::pair<double, double>> period_windows(const ScenarioConfig& config);

}  // namespace tcl
