#include "tcl/output.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>
#include <system_error>

namespace tcl::output {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                               EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw IoError("sha256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) fmt::format_to(std::back_inserter(hex), "{:02x}", digest[i]);
  return hex;
}

ArtifactWriter::ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }
}

ArtifactWriter::~ArtifactWriter() {
  for (const auto& [tmp, art] : staged_) {
    std::error_code ec;
    fs::remove(tmp, ec);
  }
}

void ArtifactWriter::add(const std::string& name, const std::string& content) {
  const fs::path tmp = dir_ / fmt::format(".{}.{}.tmp", name, ::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    staged_.push_back({tmp, Artifact{name, sha256_hex(content), content.size()}});
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
}

std::vector<Artifact> ArtifactWriter::staged() const {
  std::vector<Artifact> arts;
  for (const auto& [tmp, art] : staged_) arts.push_back(art);
  return arts;
}

std::vector<Artifact> ArtifactWriter::commit() {
  std::vector<Artifact> done;
  for (const auto& [tmp, art] : staged_) {
    std::error_code ec;
    fs::rename(tmp, dir_ / art.file, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    done.push_back(art);
  }
  staged_.clear();
  return done;
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::string power_csv(const SimulationTrace& trace) {
  std::string s = "time_h,power_kw\n";
  for (std::size_t i = 0; i < trace.time.size(); ++i) {
    fmt::format_to(std::back_inserter(s), "{},{}\n", trace.time[i], trace.power[i]);
  }
  return s;
}

std::string temps_csv(const SimulationTrace& trace) {
  std::string s = "time_h,device_id,theta_c\n";
  for (std::size_t i = 0; i < trace.time.size(); ++i) {
    for (std::size_t d = 0; d < trace.sampled_devices.size(); ++d) {
      fmt::format_to(std::back_inserter(s), "{},{},{}\n", trace.time[i],
                     trace.sampled_devices[d], trace.device_temps[d][i]);
    }
  }
  return s;
}

std::string events_csv(const SimulationTrace& trace) {
  std::string s = "time_h,direction,delta_kw\n";
  for (const PowerEvent& e : trace.ledger.events()) {
    fmt::format_to(std::back_inserter(s), "{},{},{}\n", e.time,
                   e.direction == Direction::up ? "up" : "down", e.delta_kw);
  }
  return s;
}

std::string metrics_csv(const SimulationTrace& trace,
                        const std::vector<std::pair<double, double>>& windows) {
  std::string s =
      "window_start_h,window_end_h,order_parameter,peak_to_peak_kw,std_kw,mean_kw\n";
  for (const auto& [a, b] : windows) {
    const Amplitude amp = oscillation_amplitude(trace, a, b);
    fmt::format_to(std::back_inserter(s), "{},{},{},{},{},{}\n", a, b,
                   order_at(trace, b), amp.peak_to_peak, amp.std, amp.mean);
  }
  return s;
}

std::string convergence_csv(const std::vector<double>& distances) {
  std::string s = "k,sup_distance\n";
  for (std::size_t k = 0; k < distances.size(); ++k) {
    fmt::format_to(std::back_inserter(s), "{},{}\n", k, distances[k]);
  }
  return s;
}

std::string checks_csv(const std::vector<Check>& checks) {
  std::string s = "check,value,tolerance,pass\n";
  for (const Check& c : checks) {
    fmt::format_to(std::back_inserter(s), "{},{},{},{}\n", c.name, c.value,
                   c.tolerance, c.pass ? "true" : "false");
  }
  return s;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config_path"] = m.config_path;
  j["output_dir"] = m.output_dir;
  j["seed"] = m.seed;
  j["artifacts"] = nlohmann::ordered_json::array();
  for (const Artifact& a : m.artifacts) {
    j["artifacts"].push_back({{"file", a.file}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  }
  j["wall_clock_s"] = m.wall_clock_s;
  return j.dump(2) + "\n";
}

CsvTable read_csv(std::istream& in) {
  CsvTable rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tcl::output
