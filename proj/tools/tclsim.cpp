// tclsim: batch front-end for the TCL population simulator and the timing
// convergence analysis.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "tcl/averaging.hpp"
#include "tcl/output.hpp"
#include "tcl/population.hpp"
#include "tcl/scenario.hpp"
#include "tcl/thermostat.hpp"

namespace {

namespace fs = std::filesystem;
namespace avg = tcl::averaging;
namespace out = tcl::output;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kInvalid = 2;
constexpr int kIoFailure = 3;

constexpr const char* kOutputEnv = "TCLSIM_OUTPUT_DIR";
constexpr const char* kFallbackDir = "tclsim_out";

struct Globals {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
};

std::string resolve_dir(const Globals& g, const std::optional<std::string>& from_config) {
  if (g.output_dir) return *g.output_dir;
  if (from_config) return *from_config;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return kFallbackDir;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_simulate(const Globals& g, const std::string& config_path) {
  const auto t0 = std::chrono::steady_clock::now();
  {
    std::error_code ec;
    if (!fs::is_regular_file(config_path, ec)) {
      std::cerr << "error: cannot read config file " << config_path << "\n";
      return kIoFailure;
    }
  }
  tcl::ScenarioFile sf;
  try {
    sf = tcl::load_scenario(config_path);
  } catch (const tcl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  tcl::ScenarioConfig& cfg = sf.config;
  if (g.seed) cfg.seed = *g.seed;
  const std::string dir = resolve_dir(g, sf.output_dir);

  tcl::SimulationTrace trace;
  try {
    trace = tcl::run(cfg);
  } catch (const tcl::ConfigError& e) {
    std::cerr << "error: " << config_path << ": " << e.what() << "\n";
    return kInvalid;
  }
  const auto windows = tcl::period_windows(cfg);

  try {
    out::ArtifactWriter writer(dir);
    writer.add("power.csv", out::power_csv(trace));
    writer.add("temps.csv", out::temps_csv(trace));
    writer.add("events.csv", out::events_csv(trace));
    writer.add("metrics.csv", out::metrics_csv(trace, windows));
    out::RunManifest m;
    m.command = "simulate";
    m.config_path = config_path;
    m.output_dir = dir;
    m.seed = cfg.seed;
    m.artifacts = writer.staged();
    m.wall_clock_s = seconds_since(t0);
    writer.add("manifest.json", out::manifest_json(m));
    writer.commit();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  }

  const double mean_all = tcl::oscillation_amplitude(trace, 0.0, cfg.horizon).mean;
  std::cout << "scenario " << cfg.name << ": " << cfg.n_devices << " devices, "
            << cfg.horizon << " h, seed " << cfg.seed << "\n"
            << "  switch events:        " << trace.ledger.size() << "\n"
            << "  mean power:           " << mean_all << " kW\n"
            << "  final order param:    " << trace.order.back() << "\n"
            << "  max comfort excursion " << trace.max_comfort_excursion << " degC\n"
            << "  outputs in            " << dir << "\n";
  return kOk;
}

int cmd_analyze(const Globals& g, std::int64_t n, double period,
                std::optional<std::uint64_t> sub_seed, std::int64_t max_iters) {
  const auto t0 = std::chrono::steady_clock::now();
  if (n < 2 || n > 1024) {
    std::cerr << "error: --n must be in [2, 1024]\n";
    return kInvalid;
  }
  if (!(period > 0.0) || !std::isfinite(period)) {
    std::cerr << "error: --period must be positive and finite\n";
    return kInvalid;
  }
  if (max_iters < 1) {
    std::cerr << "error: --max-iters must be at least 1\n";
    return kInvalid;
  }
  const std::uint64_t seed = sub_seed.value_or(g.seed.value_or(1));
  const auto size = static_cast<std::size_t>(n);

  std::mt19937_64 rng(seed);
  const auto x0 = avg::random_anchored_start(size, period, rng);
  avg::ConvergenceOptions opts;
  opts.max_iterations = static_cast<std::uint64_t>(max_iters);
  opts.record_history = true;
  const auto result = avg::converge(x0, opts);

  const auto gamma = avg::build_gamma(size);
  std::vector<out::Check> checks;
  double row_residual = 0.0;
  for (double s : gamma.row_sums()) row_residual = std::max(row_residual, std::abs(s - 1.0));
  checks.push_back({"row_sum_residual", row_residual, 1e-14, row_residual < 1e-14});

  auto eig_residual = [&](const std::vector<double>& v) {
    const auto gv = gamma * std::span<const double>(v);
    return avg::sup_distance(gv, v);
  };
  auto g_vec = avg::gamma_eigvec(size);
  std::vector<double> one_minus(g_vec.size());
  for (std::size_t i = 0; i < g_vec.size(); ++i) one_minus[i] = 1.0 - g_vec[i];
  const double r1 = eig_residual(g_vec);
  const double r2 = eig_residual(one_minus);
  checks.push_back({"gamma_eigvec_residual", r1, 1e-14, r1 < 1e-14});
  checks.push_back({"one_minus_gamma_residual", r2, 1e-14, r2 < 1e-14});

  const double limit = avg::gamma_power(size, std::uint64_t{1} << 40)
                           .max_abs_diff(avg::gamma_limit(size));
  checks.push_back({"power_limit_residual_k2p40", limit, 1e-9, limit < 1e-9});

  const double rho = avg::interior_spectral_radius(size);
  checks.push_back({"interior_spectral_radius", rho, 1.0, rho < 1.0});

  const double tol = 1e-9 * period;
  checks.push_back({"iterations_to_converge", static_cast<double>(result.iterations),
                    static_cast<double>(max_iters), result.converged});
  checks.push_back({"final_distance_to_fixed_point", result.distance_to_fixed_point, tol,
                    result.distance_to_fixed_point < tol});

  const std::string dir = resolve_dir(g, std::nullopt);
  try {
    out::ArtifactWriter writer(dir);
    writer.add("convergence.csv", out::convergence_csv(result.history));
    writer.add("gamma_checks.csv", out::checks_csv(checks));
    out::RunManifest m;
    m.command = "analyze-convergence";
    m.output_dir = dir;
    m.seed = seed;
    m.artifacts = writer.staged();
    m.wall_clock_s = seconds_since(t0);
    writer.add("manifest.json", out::manifest_json(m));
    writer.commit();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  }

  bool all = true;
  std::cout << "N=" << n << " T=" << period << " seed=" << seed << "\n";
  for (const auto& c : checks) {
    std::cout << "  " << (c.pass ? "ok   " : "FAIL ") << c.name << " = " << c.value
              << " (limit " << c.tolerance << ")\n";
    all = all && c.pass;
  }
  std::cout << "  cos(pi/N) = " << std::cos(std::numbers::pi / static_cast<double>(n))
            << "\n  final timings:";
  for (std::size_t i = 0; i < size; ++i) std::cout << ' ' << result.final.x[i];
  std::cout << "\n";
  return all ? kOk : kCheckFailed;
}

struct SingleOptions {
  tcl::TclParameters params;
  std::string mode = "cooling";
  double horizon = 40.0;
  double dt = 1e-3;
  std::optional<double> step_time;
  double step_delta = 0.5;
};

void print_cycle(const char* label, const tcl::CycleTimes& c) {
  std::cout << label << ": T_on " << c.on << " h, T_off " << c.off << " h, period "
            << c.period << " h, duty " << c.duty << "\n";
}

int cmd_single(const Globals& g, SingleOptions o) {
  const auto t0 = std::chrono::steady_clock::now();
  o.params.mode = o.mode == "heating" ? tcl::Mode::heating : tcl::Mode::cooling;
  tcl::CycleTimes cycle;
  try {
    tcl::validate(o.params);
    cycle = tcl::natural_cycle(o.params);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }

  tcl::ScenarioConfig cfg;
  cfg.name = "single-tcl";
  cfg.n_devices = 1;
  cfg.base_params = o.params;
  cfg.horizon = o.horizon;
  cfg.reporting_step = o.dt;
  cfg.temperature_sample = 1;
  cfg.seed = g.seed.value_or(1);
  if (o.step_time) cfg.broadcasts.push_back({*o.step_time, o.step_delta});

  tcl::SimulationTrace trace;
  try {
    trace = tcl::run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }

  std::string trace_csv = "time_h,theta_c,power_kw\n";
  for (std::size_t i = 0; i < trace.time.size(); ++i) {
    trace_csv += out::format_number(trace.time[i]) + "," +
                 out::format_number(trace.device_temps[0][i]) + "," +
                 out::format_number(trace.power[i]) + "\n";
  }
  std::string cycle_csv = "setpoint_c,t_on_h,t_off_h,period_h,duty\n";
  auto cycle_row = [&](double sp, const tcl::CycleTimes& c) {
    cycle_csv += out::format_number(sp) + "," + out::format_number(c.on) + "," +
                 out::format_number(c.off) + "," + out::format_number(c.period) + "," +
                 out::format_number(c.duty) + "\n";
  };
  cycle_row(o.params.setpoint, cycle);
  print_cycle("closed form", cycle);
  if (o.step_time) {
    tcl::TclParameters shifted = o.params;
    shifted.setpoint += o.step_delta;
    const auto after = tcl::natural_cycle(shifted);
    cycle_row(shifted.setpoint, after);
    print_cycle("after step ", after);
  }

  const std::string dir = resolve_dir(g, std::nullopt);
  try {
    out::ArtifactWriter writer(dir);
    writer.add("single_tcl.csv", trace_csv);
    writer.add("cycle.csv", cycle_csv);
    writer.add("events.csv", out::events_csv(trace));
    out::RunManifest m;
    m.command = "single-tcl";
    m.output_dir = dir;
    m.seed = cfg.seed;
    m.artifacts = writer.staged();
    m.wall_clock_s = seconds_since(t0);
    writer.add("manifest.json", out::manifest_json(m));
    writer.commit();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  }
  std::cout << "outputs in " << dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::cout.precision(9);
  CLI::App app{"Simulate thermostatically controlled load populations"};
  app.require_subcommand(1);

  Globals g;
  app.add_option("--output-dir", g.output_dir,
                 std::string("Output directory (default: $") + kOutputEnv + " or " +
                     kFallbackDir + ")");
  app.add_option("--seed", g.seed, "Override the random seed");

  std::string config_path;
  auto* sim = app.add_subcommand("simulate", "Run a scenario file");
  sim->add_option("config", config_path, "Scenario file")->required();
  sim->fallthrough();

  std::int64_t n = 0;
  double period = 0.0;
  std::optional<std::uint64_t> seed;
  std::int64_t max_iters = 1'000'000;
  auto* ana = app.add_subcommand("analyze-convergence",
                                 "Check convergence of the timing averaging map");
  ana->add_option("--n", n, "Number of devices")->required();
  ana->add_option("--period", period, "Period T in hours")->required();
  ana->add_option("--seed", seed, "Seed for the random start (default 1)");
  ana->add_option("--max-iters", max_iters, "Iteration cap");
  ana->fallthrough();

  SingleOptions so;
  double step_time = -1.0;
  auto* single = app.add_subcommand("single-tcl", "Simulate one device");
  single->add_option("--resistance", so.params.resistance, "R, degC/kW");
  single->add_option("--capacitance", so.params.capacitance, "C, kWh/degC");
  single->add_option("--power", so.params.power, "Thermal power P, kW");
  single->add_option("--cop", so.params.cop, "Coefficient of performance");
  single->add_option("--setpoint", so.params.setpoint, "Setpoint, degC");
  single->add_option("--deadband", so.params.deadband, "Deadband width, degC");
  single->add_option("--ambient", so.params.ambient, "Ambient temperature, degC");
  single->add_option("--mode", so.mode, "cooling or heating")
      ->check(CLI::IsMember({"cooling", "heating"}));
  single->add_option("--horizon", so.horizon, "Hours to simulate");
  single->add_option("--dt", so.dt, "Reporting step, hours");
  single->add_option("--step-time", step_time, "Time of a setpoint step, hours");
  single->add_option("--step-delta", so.step_delta, "Size of the setpoint step, degC");
  single->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  if (sim->parsed()) return cmd_simulate(g, config_path);
  if (ana->parsed()) return cmd_analyze(g, n, period, seed, max_iters);
  if (single->count("--step-time") > 0) so.step_time = step_time;
  return cmd_single(g, so);
}
