#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's propagation or cycle code.

#include <cmath>
#include <vector>

namespace oracle {

struct Thermal {
  double r = 2.0, c = 5.0, p = 14.0, ambient = 28.0;
  bool heating = false;
};

inline double rhs(const Thermal& m, double theta, bool on) {
  const double drive = on ? (m.heating ? m.r * m.p : -m.r * m.p) : 0.0;
  return (m.ambient - theta + drive) / (m.r * m.c);
}

/// Fixed-step classical Runge-Kutta over `duration` hours.
inline double rk4(const Thermal& m, double theta, bool on, double duration,
                  double h = 1e-5) {
  const auto steps = static_cast<long>(std::ceil(duration / h));
  const double dt = duration / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    const double k1 = rhs(m, theta, on);
    const double k2 = rhs(m, theta + 0.5 * dt * k1, on);
    const double k3 = rhs(m, theta + 0.5 * dt * k2, on);
    const double k4 = rhs(m, theta + dt * k3, on);
    theta += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return theta;
}

/// Time for an RK4 trajectory to cross `level`, located by linear
/// interpolation inside the crossing step.
inline double rk4_crossing(const Thermal& m, double theta, bool on, double level,
                           double h = 1e-5) {
  double t = 0.0;
  const bool rising = rhs(m, theta, on) > 0.0;
  for (;;) {
    const double next = rk4(m, theta, on, h, h);
    const bool crossed = rising ? next >= level : next <= level;
    if (crossed) return t + h * (level - theta) / (next - theta);
    theta = next;
    t += h;
  }
}

struct Cycle {
  double on = 0.0, off = 0.0;
};

/// One cooling cycle from the upper threshold, detected by simulation.
inline Cycle simulated_cycle(const Thermal& m, double lo, double hi) {
  Cycle c;
  c.on = rk4_crossing(m, hi, true, lo);
  c.off = rk4_crossing(m, lo, false, hi);
  return c;
}

struct Switch {
  double time;
  bool now_on;
};

/// Piecewise closed-form cooling trajectory from (theta0, on0) with a fixed
/// band: switch times and a sampler. Written from the ODE solution directly.
struct Piecewise {
  Thermal m;
  double lo, hi;
  double theta0;
  bool on0;
  std::vector<Switch> switches;
  std::vector<double> start_theta;  // temperature at each switch

  Piecewise(const Thermal& model, double lo_, double hi_, double th0, bool on,
            double horizon)
      : m(model), lo(lo_), hi(hi_), theta0(th0), on0(on) {
    double t = 0.0, theta = th0;
    bool s = on;
    const double tau = m.r * m.c;
    for (;;) {
      const double eq = s ? m.ambient - m.r * m.p : m.ambient;
      const double target = s ? lo : hi;
      const double dt = tau * std::log((theta - eq) / (target - eq));
      if (t + dt > horizon) break;
      t += dt;
      theta = target;
      s = !s;
      switches.push_back({t, s});
      start_theta.push_back(theta);
    }
  }

  double at(double t) const {
    double t0 = 0.0, theta = theta0;
    bool s = on0;
    for (std::size_t i = 0; i < switches.size() && switches[i].time <= t; ++i) {
      t0 = switches[i].time;
      theta = start_theta[i];
      s = switches[i].now_on;
    }
    const double eq = s ? m.ambient - m.r * m.p : m.ambient;
    return eq + (theta - eq) * std::exp(-(t - t0) / (m.r * m.c));
  }
};

}  // namespace oracle
