#include "tcl/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <vector>

namespace tcl {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(int line, const std::string& msg) const {
    std::ostringstream out;
    out << source_ << ':' << line << ": " << msg;
    throw ConfigError(out.str());
  }

  double number(int line, std::string_view text) const {
    text = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      fail(line, "expected a number, got '" + std::string(text) + "'");
    }
    if (!std::isfinite(v)) fail(line, "value must be finite");
    return v;
  }

  double positive(int line, std::string_view text) const {
    const double v = number(line, text);
    if (!(v > 0.0)) fail(line, "value must be positive");
    return v;
  }

  std::uint64_t integer(int line, std::string_view text) const {
    text = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      fail(line, "expected a non-negative integer, got '" + std::string(text) + "'");
    }
    return v;
  }

  bool boolean(int line, std::string_view text) const {
    text = trim(text);
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    fail(line, "expected true or false, got '" + std::string(text) + "'");
  }

  // "normal(m, s)", "uniform(lo, hi)" or a plain number.
  std::optional<FieldDistribution> distribution(int line, std::string_view text,
                                                ParamField field,
                                                double& base) const {
    text = trim(text);
    const auto open = text.find('(');
    if (open == std::string_view::npos) {
      base = number(line, text);
      return std::nullopt;
    }
    if (text.back() != ')') fail(line, "unterminated distribution");
    const auto kind = trim(text.substr(0, open));
    const auto args = text.substr(open + 1, text.size() - open - 2);
    const auto comma = args.find(',');
    if (comma == std::string_view::npos) fail(line, "distribution needs two arguments");
    FieldDistribution fd;
    fd.field = field;
    fd.a = number(line, args.substr(0, comma));
    fd.b = number(line, args.substr(comma + 1));
    if (kind == "normal") {
      fd.kind = FieldDistribution::Kind::normal;
      if (fd.b < 0.0) fail(line, "normal spread must be non-negative");
      base = fd.a;
    } else if (kind == "uniform") {
      fd.kind = FieldDistribution::Kind::uniform;
      if (fd.b < fd.a) fail(line, "uniform bounds must satisfy low <= high");
      base = 0.5 * (fd.a + fd.b);
    } else {
      fail(line, "unknown distribution '" + std::string(kind) + "'");
    }
    return fd;
  }

 private:
  std::string source_;
};

const std::map<std::string, ParamField, std::less<>>& param_keys() {
  static const std::map<std::string, ParamField, std::less<>> keys{
      {"resistance", ParamField::resistance}, {"capacitance", ParamField::capacitance},
      {"power", ParamField::power},           {"cop", ParamField::cop},
      {"setpoint", ParamField::setpoint},     {"deadband", ParamField::deadband},
      {"ambient", ParamField::ambient}};
  return keys;
}

double& param_ref(TclParameters& p, ParamField f) {
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

}  // namespace

ScenarioFile parse_scenario(std::istream& in, const std::string& source) {
  Parser ps(source);
  ScenarioFile out;
  ScenarioConfig& c = out.config;
  std::map<ParamField, FieldDistribution> dists;
  std::map<ParamField, std::pair<double, int>> minimums;
  std::set<std::string> seen;
  std::string section;
  int population_line = 1;

  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) {
      text = text.substr(0, hash);
    }
    text = trim(text);
    if (text.empty()) continue;

    if (text.front() == '[') {
      if (text.back() != ']') ps.fail(line, "malformed section header");
      section = std::string(trim(text.substr(1, text.size() - 2)));
      if (section != "population" && section != "protocol" &&
          section != "broadcasts" && section != "output") {
        ps.fail(line, "unknown section [" + section + "]");
      }
      if (section == "population") population_line = line;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) ps.fail(line, "expected 'key = value'");
    const std::string key(trim(text.substr(0, eq)));
    const std::string_view value = trim(text.substr(eq + 1));
    if (key.empty()) ps.fail(line, "missing key");
    if (value.empty()) ps.fail(line, "missing value for '" + key + "'");
    if (section.empty()) ps.fail(line, "key '" + key + "' outside any section");
    if (!(section == "broadcasts" && key == "step") &&
        !seen.insert(section + "." + key).second) {
      ps.fail(line, "duplicate key '" + key + "' in [" + section + "]");
    }

    if (section == "population") {
      if (const auto it = param_keys().find(key); it != param_keys().end()) {
        double base = 0.0;
        auto fd = ps.distribution(line, value, it->second, base);
        param_ref(c.base_params, it->second) = base;
        if (fd) dists[it->second] = *fd;
        continue;
      }
      const auto dot = key.find('.');
      if (dot != std::string::npos && key.substr(dot) == ".min") {
        const auto it = param_keys().find(key.substr(0, dot));
        if (it == param_keys().end()) ps.fail(line, "unknown parameter in '" + key + "'");
        minimums[it->second] = {ps.number(line, value), line};
      } else if (key == "n_devices") {
        const auto n = ps.integer(line, value);
        if (n < 1 || n > UINT32_MAX) ps.fail(line, "n_devices must be in [1, 2^32)");
        c.n_devices = static_cast<std::uint32_t>(n);
      } else if (key == "mode") {
        if (value == "cooling") {
          c.base_params.mode = Mode::cooling;
        } else if (value == "heating") {
          c.base_params.mode = Mode::heating;
        } else {
          ps.fail(line, "mode must be cooling or heating");
        }
      } else if (key == "initial_status") {
        if (value == "duty") {
          c.initial_status = InitialStatus::duty;
        } else if (value == "off") {
          c.initial_status = InitialStatus::all_off;
        } else if (value == "on") {
          c.initial_status = InitialStatus::all_on;
        } else {
          ps.fail(line, "initial_status must be duty, off or on");
        }
      } else if (key == "seed") {
        c.seed = ps.integer(line, value);
      } else if (key == "horizon") {
        c.horizon = ps.positive(line, value);
      } else if (key == "reporting_step") {
        c.reporting_step = ps.positive(line, value);
      } else if (key == "event_tolerance") {
        c.event_tolerance = ps.positive(line, value);
      } else if (key == "workers") {
        const auto w = ps.integer(line, value);
        if (w < 1 || w > 1024) ps.fail(line, "workers must be in [1, 1024]");
        c.workers = static_cast<int>(w);
      } else {
        ps.fail(line, "unknown key '" + key + "' in [population]");
      }
    } else if (section == "protocol") {
      if (key == "enabled") {
        c.protocol_enabled = ps.boolean(line, value);
      } else if (key == "decay_rate") {
        c.protocol.decay_rate = ps.number(line, value);
        if (c.protocol.decay_rate < 0.0) ps.fail(line, "decay_rate must be non-negative");
      } else if (key == "observation") {
        if (value == "all") {
          c.protocol.observation = ObservationPolicy::all_events;
        } else if (value == "same_direction") {
          c.protocol.observation = ObservationPolicy::same_direction;
        } else if (value == "enforced_only") {
          c.protocol.observation = ObservationPolicy::enforced_only;
        } else {
          ps.fail(line, "observation must be all, same_direction or enforced_only");
        }
      } else if (key == "period") {
        if (value == "a_priori") {
          c.protocol.period_mode = PeriodMode::a_priori;
        } else if (value == "measured") {
          c.protocol.period_mode = PeriodMode::measured;
        } else {
          ps.fail(line, "period must be a_priori or measured");
        }
      } else {
        ps.fail(line, "unknown key '" + key + "' in [protocol]");
      }
    } else if (section == "broadcasts") {
      if (key != "step") ps.fail(line, "unknown key '" + key + "' in [broadcasts]");
      std::istringstream fields{std::string(value)};
      std::string t, d, extra;
      if (!(fields >> t >> d) || (fields >> extra)) {
        ps.fail(line, "step needs '<time_h> <delta_c>'");
      }
      const double time = ps.number(line, t);
      if (time < 0.0) ps.fail(line, "broadcast time must be non-negative");
      c.broadcasts.push_back({time, ps.number(line, d)});
    } else {
      if (key == "name") {
        c.name = std::string(value);
      } else if (key == "dir") {
        out.output_dir = std::string(value);
      } else if (key == "temperature_sample") {
        const auto n = ps.integer(line, value);
        if (n > UINT32_MAX) ps.fail(line, "temperature_sample too large");
        c.temperature_sample = static_cast<std::uint32_t>(n);
      } else if (key == "order_step") {
        c.order_parameter_step = ps.positive(line, value);
      } else {
        ps.fail(line, "unknown key '" + key + "' in [output]");
      }
    }
  }

  for (const auto& [field, m] : minimums) {
    const auto it = dists.find(field);
    if (it == dists.end()) ps.fail(m.second, "'.min' needs a distribution on the same parameter");
    it->second.min_exclusive = m.first;
  }
  for (auto& [field, fd] : dists) {
    // Normal capacitance draws are truncated at 0.5 unless the file says otherwise.
    if (field == ParamField::capacitance && fd.kind == FieldDistribution::Kind::normal &&
        !fd.min_exclusive) {
      fd.min_exclusive = 0.5;
    }
    c.heterogeneity.push_back(fd);
  }

  try {
    validate(c);
  } catch (const ConfigError& e) {
    ps.fail(population_line, e.what());
  }
  return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ":0: cannot open file");
  return parse_scenario(in, path.string());
}

}  // namespace tcl
