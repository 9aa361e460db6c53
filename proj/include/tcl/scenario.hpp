#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>

#include "tcl/population.hpp"

// Scenario files are INI-like text:
//
//   # comment
//   [population]
//   n_devices   = 10000
//   capacitance = normal(5, 0.5)
//   [protocol]
//   enabled = true
//   [broadcasts]
//   step = 10.0 0.5
//   [output]
//   dir = out/fig2
//
// README.md lists every key. Errors carry "<source>:<line>: " prefixes.

namespace tcl {

struct ScenarioFile {
  ScenarioConfig config;
  std::optional<std::string> output_dir;
};

ScenarioFile parse_scenario(std::istream& in, const std::string& source);

/// Throws ConfigError when the file cannot be read or is invalid.
ScenarioFile load_scenario(const std::filesystem::path& path);

}  // namespace tcl
