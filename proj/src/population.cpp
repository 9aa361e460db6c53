#include "tcl/population.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <queue>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tcl {

namespace {

constexpr double kSnap = 1e-12;  // hours; coincident-time tolerance for stops

double& field_ref(TclParameters& p, ParamField f) {
  switch (f) {
    case ParamField::resistance: return p.resistance;
    case ParamField::capacitance: return p.capacitance;
    case ParamField::power: return p.power;
    case ParamField::cop: return p.cop;
    case ParamField::setpoint: return p.setpoint;
    case ParamField::deadband: return p.deadband;
    case ParamField::ambient: return p.ambient;
  }
  return p.capacitance;
}

bool params_ok(const TclParameters& p) {
  try {
    tcl::validate(p);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// Hours already spent on the current hysteresis leg, assuming the device sits
// on its limit cycle.
double time_on_leg(const TclParameters& p, const Band& band, double theta,
                   bool on) {
  const double tau = p.time_constant();
  const double eq = p.equilibrium(on);
  const double start = (p.mode == Mode::cooling) == on ? band.hi : band.lo;
  return tau * std::log((start - eq) / (theta - eq));
}

struct Stepper {
  double dt;
  double tolerance;
};

struct DeviceCache {
  double step_relax = 1.0;  // exp(-dt/tau)
  double step_alpha = 1.0;  // exp(-a dt)
};

void set_band(Device& d) {
  const double half = d.params.deadband / 2.0;
  d.thermo.band = {d.params.setpoint - half + d.proto.alpha,
                   d.params.setpoint + half - d.proto.alpha};
}

void track_comfort(Device& d) {
  const double theta = d.thermo.theta;
  if (!d.settled) {
    const Band nominal = d.params.nominal_band();
    if (nominal.contains(theta)) {
      d.settled = true;
      d.comfort_hull = nominal;
    }
  }
  const double over = std::max(d.comfort_hull.lo - theta, theta - d.comfort_hull.hi);
  d.max_excursion = std::max(d.max_excursion, over);
}

void emit(Device& d, bool enforced, std::vector<PowerEvent>& out) {
  PowerEvent e;
  e.time = d.time;
  const double draw = electrical_power(d.params, true);
  e.delta_kw = d.thermo.on ? draw : -draw;
  e.direction = d.thermo.on ? Direction::up : Direction::down;
  e.enforced = enforced;
  e.source = d.index;
  e.seq = d.seq++;
  out.push_back(e);
  if (d.thermo.on) d.last_on = d.time;
  ++d.switches;
}

void natural_toggle(Device& d, std::vector<PowerEvent>& out) {
  d.thermo.on = !d.thermo.on;
  d.proto.estimator.record_natural(d.time, d.thermo.on);
  emit(d, false, out);
}

// Threshold the device is heading for with its current status.
double active_threshold(const Device& d) {
  const bool upper = (d.params.mode == Mode::cooling) != d.thermo.on;
  return upper ? d.thermo.band.hi : d.thermo.band.lo;
}

// Offset in (0, h] at which the hysteresis rule fires, given that it does not
// fire now and does fire after h.
double crossing_offset(const Device& d, double h, const Stepper& st) {
  const double tau = d.params.time_constant();
  const double eq = d.params.equilibrium(d.thermo.on);
  if (d.proto.alpha == 0.0 || d.proto.decay_rate == 0.0) {
    const double thr = active_threshold(d);
    const double s = tau * std::log((d.thermo.theta - eq) / (thr - eq));
    return std::clamp(s, 0.0, h);
  }
  double lo = 0.0;
  double hi = h;
  ThermostatState probe = d.thermo;
  const double half = d.params.deadband / 2.0;
  while (hi - lo > st.tolerance) {
    const double mid = 0.5 * (lo + hi);
    const double a = d.proto.alpha * std::exp(-d.proto.decay_rate * mid);
    probe.theta = relax(d.thermo.theta, eq, tau, mid);
    probe.band = {d.params.setpoint - half + a, d.params.setpoint + half - a};
    if (switch_due(probe, d.params.mode)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

void move_to(Device& d, double target, double theta_end, double alpha_end) {
  d.time = target;
  d.thermo.theta = theta_end;
  d.proto.alpha = alpha_end;
  set_band(d);
  track_comfort(d);
}

// Advances one device to `t_to`, resolving threshold crossings and the
// enforced switch. Returns true when it stops early at its period end.
bool advance(Device& d, const DeviceCache& cache, double t_to, const Stepper& st,
             std::vector<PowerEvent>& out, std::uint32_t& enforced_seq) {
  const TclParameters& p = d.params;
  const double tau = p.time_constant();
  for (;;) {
    if (switch_due(d.thermo, p.mode)) {
      natural_toggle(d, out);
      continue;
    }
    ProtocolState& pr = d.proto;
    double target = t_to;
    if (pr.engaged) {
      if (!pr.fired && d.time >= pr.enforced_time()) {
        if (enforced_switch(d.thermo, pr, p.mode).toggled) {
          enforced_seq = d.seq;
          emit(d, true, out);
        }
        continue;
      }
      if (d.time >= pr.period_end()) return true;
      if (!pr.fired) target = std::min(target, pr.enforced_time());
      target = std::min(target, pr.period_end());
    }
    if (target <= d.time) return false;

    const double h = target - d.time;
    const bool full = std::abs(h - st.dt) <= 1e-12 * st.dt;
    const double eq = p.equilibrium(d.thermo.on);
    const double f = full ? cache.step_relax : std::exp(-h / tau);
    const double g = full ? cache.step_alpha : std::exp(-pr.decay_rate * h);
    const double theta_end = eq + (d.thermo.theta - eq) * f;
    const double alpha_end = pr.alpha * g;
    const double half = p.deadband / 2.0;
    const ThermostatState probe{
        theta_end, d.thermo.on,
        {p.setpoint - half + alpha_end, p.setpoint + half - alpha_end}};
    if (!switch_due(probe, p.mode)) {
      move_to(d, target, theta_end, alpha_end);
      continue;
    }

    const double s = crossing_offset(d, h, st);
    const bool constant_band = pr.alpha == 0.0 || pr.decay_rate == 0.0;
    const double threshold = active_threshold(d);
    const double theta_s = constant_band ? threshold : relax(d.thermo.theta, eq, tau, s);
    const double alpha_s = constant_band ? pr.alpha : pr.alpha * std::exp(-pr.decay_rate * s);
    const double when = s >= h ? target : d.time + s;
    move_to(d, when, theta_s, alpha_s);
    natural_toggle(d, out);
  }
}

void apply_broadcast(Device& d, const BroadcastEvent& b,
                     const ScenarioConfig& cfg) {
  const Band old_nominal = d.params.nominal_band();
  if (cfg.protocol_enabled) {
    TclParameters shifted = d.params;
    shifted.setpoint += b.delta_setpoint;
    double period = natural_cycle(shifted).period;
    if (cfg.protocol.period_mode == PeriodMode::measured) {
      if (auto est = d.proto.estimator.estimate()) period = *est;
    }
    d.proto.decay_rate = cfg.protocol.decay_rate;
    auto [proto, params] =
        on_broadcast(d.proto, d.params, b.delta_setpoint, b.time, period, d.rng);
    d.proto = std::move(proto);
    d.params = params;
  } else {
    d.params.setpoint += b.delta_setpoint;
  }
  set_band(d);
  d.natural_period = natural_cycle(d.params).period;
  const Band nominal = d.params.nominal_band();
  d.comfort_hull = {std::min(old_nominal.lo, nominal.lo),
                    std::max(old_nominal.hi, nominal.hi)};
  d.settled = false;
  track_comfort(d);
}

double draw_field(const FieldDistribution& fd, std::mt19937_64& rng) {
  if (fd.kind == FieldDistribution::Kind::normal) {
    std::normal_distribution<double> n(fd.a, fd.b);
    return n(rng);
  }
  std::uniform_real_distribution<double> u(fd.a, fd.b);
  return u(rng);
}

}  // namespace

void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.n_devices < 1) fail("n_devices must be at least 1");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) fail("horizon must be positive");
  if (!(c.reporting_step > 0.0) || c.reporting_step > c.horizon) {
    fail("reporting_step must be positive and no larger than the horizon");
  }
  if (!(c.event_tolerance > 0.0)) fail("event_tolerance must be positive");
  if (!(c.order_parameter_step > 0.0)) fail("order_parameter_step must be positive");
  if (!(c.protocol.decay_rate >= 0.0)) fail("decay_rate must be non-negative");
  if (c.workers < 1) fail("workers must be at least 1");
  try {
    tcl::validate(c.base_params);
  } catch (const std::exception& e) {
    fail(std::string("base parameters: ") + e.what());
  }
  TclParameters shifted = c.base_params;
  for (const auto& b : c.broadcasts) {
    if (!(b.time >= 0.0 && b.time <= c.horizon)) {
      fail("broadcast time outside [0, horizon]");
    }
    if (!std::isfinite(b.delta_setpoint)) fail("broadcast delta must be finite");
    shifted.setpoint += b.delta_setpoint;
    if (!admits_cycle(shifted, shifted.nominal_band())) {
      std::ostringstream msg;
      msg << "setpoint " << shifted.setpoint << " after broadcast at t="
          << b.time << " does not admit a limit cycle";
      fail(msg.str());
    }
  }
  for (const auto& h : c.heterogeneity) {
    if (h.kind == FieldDistribution::Kind::normal && !(h.b >= 0.0)) {
      fail("normal spread must be non-negative");
    }
    if (h.kind == FieldDistribution::Kind::uniform && !(h.a <= h.b)) {
      fail("uniform bounds must satisfy low <= high");
    }
  }
}

std::mt19937_64 device_stream(std::uint64_t seed, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), index, 0x7c1u};
  return std::mt19937_64(seq);
}

std::vector<Device> sample_population(const ScenarioConfig& cfg) {
  validate(cfg);
  std::vector<Device> devices(cfg.n_devices);
  for (std::uint32_t i = 0; i < cfg.n_devices; ++i) {
    Device& d = devices[i];
    d.index = i;
    d.rng = device_stream(cfg.seed, i);
    d.params = cfg.base_params;
    if (!cfg.heterogeneity.empty()) {
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        d.params = cfg.base_params;
        ok = true;
        for (const auto& fd : cfg.heterogeneity) {
          const double v = draw_field(fd, d.rng);
          if (fd.min_exclusive && !(v > *fd.min_exclusive)) ok = false;
          field_ref(d.params, fd.field) = v;
        }
        ok = ok && params_ok(d.params);
      }
      if (!ok) {
        std::ostringstream msg;
        msg << "heterogeneity produced invalid parameters for device " << i
            << " after 100 redraws";
        throw ConfigError(msg.str());
      }
    }
    const Band band = d.params.nominal_band();
    const CycleTimes cyc = natural_cycle(d.params);
    std::uniform_real_distribution<double> u(band.lo, band.hi);
    d.thermo.theta = u(d.rng);
    switch (cfg.initial_status) {
      case InitialStatus::duty: {
        std::bernoulli_distribution on(cyc.duty);
        d.thermo.on = on(d.rng);
        break;
      }
      case InitialStatus::all_off: d.thermo.on = false; break;
      case InitialStatus::all_on: d.thermo.on = true; break;
    }
    // Place the last switch-on where the device's orbit position implies.
    const double elapsed = time_on_leg(d.params, band, d.thermo.theta, d.thermo.on);
    d.last_on = d.thermo.on ? -elapsed : -(cyc.on + elapsed);
    d.natural_period = cyc.period;
    d.thermo.band = band;
    d.comfort_hull = band;
    d.proto.decay_rate = cfg.protocol.decay_rate;
  }
  return devices;
}

double order_parameter(std::span<const double> phases) {
  if (phases.empty()) return 0.0;
  std::complex<double> acc{0.0, 0.0};
  for (double phi : phases) {
    acc += std::polar(1.0, 2.0 * std::numbers::pi * phi);
  }
  return std::abs(acc) / static_cast<double>(phases.size());
}

double cycle_phase(const Device& d, double now) {
  double phi = (now - d.last_on) / d.natural_period;
  phi -= std::floor(phi);
  return phi;
}

std::vector<double> cycle_phases(std::span<const Device> devices, double now) {
  std::vector<double> phases;
  phases.reserve(devices.size());
  for (const Device& d : devices) phases.push_back(cycle_phase(d, now));
  return phases;
}

double limit_cycle_phase(const Device& d) {
  const Band& band = d.thermo.band;
  if (!admits_cycle(d.params, band)) return 0.0;
  const CycleTimes cyc = natural_cycle(d.params, band);
  const double elapsed = time_on_leg(d.params, band, d.thermo.theta, d.thermo.on);
  double phi = (d.thermo.on ? elapsed : cyc.on + elapsed) / cyc.period;
  phi -= std::floor(phi);
  return phi;
}

SimulationTrace run(const ScenarioConfig& cfg) {
  std::vector<Device> devices = sample_population(cfg);
  const std::size_t n = devices.size();
  const Stepper st{cfg.reporting_step, cfg.event_tolerance};

  std::vector<DeviceCache> caches(n);
  for (std::size_t i = 0; i < n; ++i) {
    caches[i].step_relax = std::exp(-st.dt / devices[i].params.time_constant());
    caches[i].step_alpha = std::exp(-cfg.protocol.decay_rate * st.dt);
  }

  SimulationTrace trace;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / st.dt));
  trace.time.reserve(steps + 1);
  trace.power.reserve(steps + 1);
  const std::uint32_t sample = std::min<std::uint32_t>(cfg.temperature_sample, cfg.n_devices);
  for (std::uint32_t i = 0; i < sample; ++i) trace.sampled_devices.push_back(i);
  trace.device_temps.assign(sample, {});
  const auto order_stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.order_parameter_step / st.dt)));

  auto record = [&](std::size_t k, double t) {
    trace.time.push_back(t);
    double total = 0.0;
    for (const Device& d : devices) total += electrical_power(d.params, d.thermo.on);
    trace.power.push_back(total);
    for (std::uint32_t s = 0; s < sample; ++s) {
      trace.device_temps[s].push_back(devices[s].thermo.theta);
    }
    if (k % order_stride == 0) {
      trace.order_time.push_back(t);
      trace.order.push_back(order_parameter(cycle_phases(devices, t)));
    }
  };

  std::vector<BroadcastEvent> broadcasts = cfg.broadcasts;
  std::stable_sort(broadcasts.begin(), broadcasts.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  std::size_t next_broadcast = 0;
  auto apply_due = [&](double t) {
    bool applied = false;
    while (next_broadcast < broadcasts.size() &&
           broadcasts[next_broadcast].time <= t + kSnap) {
      BroadcastEvent b = broadcasts[next_broadcast++];
      b.time = t;
      for (Device& d : devices) apply_broadcast(d, b, cfg);
      applied = true;
    }
    return applied;
  };

  int workers = 1;
#ifdef _OPENMP
  workers = cfg.workers;
#endif
  std::vector<std::vector<PowerEvent>> buffers(static_cast<std::size_t>(workers));
  std::vector<std::uint8_t> paused(n, 0);
  std::vector<std::uint32_t> enforced_seq(n, UINT32_MAX);
  std::vector<PowerEvent> resume_buffer;

  auto chunk = [&](double t_to) {
    std::fill(paused.begin(), paused.end(), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      int tid = 0;
#ifdef _OPENMP
      tid = omp_get_thread_num();
#endif
      const auto u = static_cast<std::size_t>(i);
      paused[u] = advance(devices[u], caches[u], t_to, st, buffers[tid],
                          enforced_seq[u]);
    }
    std::vector<PowerEvent> batch;
    for (auto& b : buffers) {
      batch.insert(batch.end(), b.begin(), b.end());
      b.clear();
    }
    trace.ledger.merge(std::move(batch));

    // Period ends resolve in time order, so every update sees the complete
    // ledger up to its own period end.
    using Entry = std::pair<double, std::uint32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    std::size_t engaged = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (devices[i].proto.engaged) ++engaged;
      if (paused[i]) queue.emplace(devices[i].time, static_cast<std::uint32_t>(i));
    }
    std::size_t completed = 0;
    while (!queue.empty()) {
      const auto [t_end, i] = queue.top();
      queue.pop();
      Device& d = devices[i];
      OwnSwitch own{d.proto.enforced_time(), d.index, enforced_seq[i],
                    d.proto.enforced_direction};
      if (!d.proto.toggled) own.seq = UINT32_MAX;
      const NeighborObservation obs =
          observe_neighbors(trace.ledger.events(), own, d.proto.period_start,
                            d.proto.period, cfg.protocol.observation);
      double next_period = d.proto.period;
      if (cfg.protocol.period_mode == PeriodMode::measured) {
        next_period = d.proto.estimator.estimate().value_or(d.proto.period);
      }
      complete_period(d.proto, obs, next_period);
      enforced_seq[i] = UINT32_MAX;
      ++completed;
      resume_buffer.clear();
      const bool again = advance(d, caches[i], t_to, st, resume_buffer, enforced_seq[i]);
      for (const auto& e : resume_buffer) trace.ledger.insert(e);
      if (again) queue.emplace(d.time, i);
    }

    if (completed > 0 && completed == engaged &&
        cfg.protocol.period_mode == PeriodMode::a_priori) {
      const double start = devices.front().proto.period_start;
      const bool aligned = std::all_of(devices.begin(), devices.end(), [&](const Device& d) {
        return d.proto.period_start == start;
      });
      if (aligned) {
        TimingSnapshot snap;
        snap.time = start;
        snap.period = devices.front().proto.period;
        for (const Device& d : devices) {
          snap.timings.push_back(d.proto.t_enforced);
          snap.anchors.push_back(d.proto.is_anchor ? 1 : 0);
        }
        trace.timing_history.push_back(std::move(snap));
      }
    }
  };

  // Switches a broadcast triggers at once are resolved before the grid
  // sample at the same instant, so every sample includes all events up to it.
  auto broadcast_at = [&](double t) {
    if (apply_due(t)) chunk(t);
  };

  broadcast_at(0.0);
  record(0, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t1 = static_cast<double>(k + 1) * st.dt;
    while (next_broadcast < broadcasts.size() &&
           broadcasts[next_broadcast].time < t1 - kSnap) {
      const double tb = broadcasts[next_broadcast].time;
      chunk(tb);
      broadcast_at(tb);
    }
    chunk(t1);
    broadcast_at(t1);
    record(k + 1, t1);
  }

  for (const Device& d : devices) {
    trace.max_comfort_excursion = std::max(trace.max_comfort_excursion, d.max_excursion);
  }
  trace.final_devices = std::move(devices);
  return trace;
}

Amplitude oscillation_amplitude(const SimulationTrace& trace, double t_a,
                                double t_b) {
  double lo = 0.0, hi = 0.0, sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < trace.time.size(); ++i) {
    const double t = trace.time[i];
    if (t < t_a - kSnap || t > t_b + kSnap) continue;
    const double p = trace.power[i];
    if (count == 0) {
      lo = hi = p;
    } else {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    sum += p;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("oscillation_amplitude: empty window");
  Amplitude a;
  a.peak = hi;
  a.trough = lo;
  a.peak_to_peak = hi - lo;
  a.mean = sum / static_cast<double>(count);
  for (std::size_t i = 0; i < trace.time.size(); ++i) {
    const double t = trace.time[i];
    if (t < t_a - kSnap || t > t_b + kSnap) continue;
    const double dev = trace.power[i] - a.mean;
    sq += dev * dev;
  }
  a.std = std::sqrt(sq / static_cast<double>(count));
  return a;
}

double order_at(const SimulationTrace& trace, double t) {
  if (trace.order.empty()) throw std::invalid_argument("order_at: no samples");
  auto it = std::lower_bound(trace.order_time.begin(), trace.order_time.end(), t);
  if (it == trace.order_time.end()) return trace.order.back();
  auto idx = static_cast<std::size_t>(it - trace.order_time.begin());
  if (idx > 0 && t - trace.order_time[idx - 1] < *it - t) --idx;
  return trace.order[idx];
}

std::optional<double> settling_time(const SimulationTrace& trace, double t_start,
                                    double window, double fraction) {
  if (!(window > 0.0)) throw std::invalid_argument("settling_time: window <= 0");
  const auto& t = trace.time;
  const auto& p = trace.power;
  const auto begin = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), t_start - kSnap) - t.begin());
  if (begin == t.size()) return std::nullopt;
  // Sums of deviations from a reference level keep the variance well
  // conditioned for large means.
  const double ref = p[begin];
  std::size_t first = begin;
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = begin; k < t.size(); ++k) {
    const double x = p[k] - ref;
    sum += x;
    sq += x * x;
    while (t[first] < t[k] - window - kSnap) {
      const double y = p[first++] - ref;
      sum -= y;
      sq -= y * y;
    }
    if (t[k] < t_start + window - kSnap) continue;
    const double count = static_cast<double>(k - first + 1);
    const double mean = sum / count;
    const double var = std::max(0.0, sq / count - mean * mean);
    if (std::sqrt(var) < fraction * (mean + ref)) return t[k];
  }
  return std::nullopt;
}

std::vector<std::pair<double, double>> period_windows(const ScenarioConfig& cfg) {
  std::vector<BroadcastEvent> broadcasts = cfg.broadcasts;
  std::stable_sort(broadcasts.begin(), broadcasts.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  TclParameters p = cfg.base_params;
  double period = natural_cycle(p).period;
  std::vector<std::pair<double, double>> out;
  double start = 0.0;
  std::size_t next = 0;
  while (start < cfg.horizon - kSnap) {
    double end = std::min(start + period, cfg.horizon);
    if (next < broadcasts.size() && broadcasts[next].time < end - kSnap &&
        broadcasts[next].time > start + kSnap) {
      end = broadcasts[next].time;
    }
    out.emplace_back(start, end);
    start = end;
    while (next < broadcasts.size() && broadcasts[next].time <= start + kSnap) {
      p.setpoint += broadcasts[next++].delta_setpoint;
      period = natural_cycle(p).period;
    }
  }
  return out;
}

}  // namespace tcl
