#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcl/population.hpp"

namespace tcl::output {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view data);

struct Artifact {
  std::string file;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Stages files as hidden temporaries in `dir` and renames them into place
/// on commit(). Anything not committed is removed on destruction, so a failed
/// run leaves no partial outputs behind.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir);
  ~ArtifactWriter();
  ArtifactWriter(const ArtifactWriter&) = delete;
  ArtifactWriter& operator=(const ArtifactWriter&) = delete;

  void add(const std::string& name, const std::string& content);
  std::vector<Artifact> staged() const;
  std::vector<Artifact> commit();
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, Artifact>> staged_;
};

std::string power_csv(const SimulationTrace& trace);
std::string temps_csv(const SimulationTrace& trace);
std::string events_csv(const SimulationTrace& trace);
std::string metrics_csv(const SimulationTrace& trace,
                        const std::vector<std::pair<double, double>>& windows);
std::string convergence_csv(const std::vector<double>& distances);

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};
std::string checks_csv(const std::vector<Check>& checks);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::vector<Artifact> artifacts;
  double wall_clock_s = 0.0;
};
std::string manifest_json(const RunManifest& manifest);

using CsvTable = std::vector<std::vector<std::string>>;
/// Splits comma-separated rows; the header row is kept.
CsvTable read_csv(std::istream& in);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

}  // namespace tcl::output
