#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcl/output.hpp"
#include "tcl/population.hpp"

using namespace tcl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path(TCL_TEST_TMP) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig small(bool protocol) {
  ScenarioConfig c;
  c.n_devices = 40;
  c.horizon = 14.0;
  c.broadcasts = {{10.0, 0.5}};
  c.protocol_enabled = protocol;
  c.temperature_sample = 3;
  return c;
}

}  // namespace

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(output::sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(output::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Csv, PowerRoundTrip) {
  const auto tr = run(small(true));
  std::istringstream in(output::power_csv(tr));
  const auto rows = output::read_csv(in);
  ASSERT_EQ(rows.size(), tr.time.size() + 1);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"time_h", "power_kw"}));
  for (std::size_t i = 0; i < tr.time.size(); ++i) {
    ASSERT_EQ(std::stod(rows[i + 1][0]), tr.time[i]);
    ASSERT_EQ(std::stod(rows[i + 1][1]), tr.power[i]);
  }
}

TEST(Csv, TempsAndEventsRoundTrip) {
  const auto tr = run(small(true));
  std::istringstream temps(output::temps_csv(tr));
  const auto t = output::read_csv(temps);
  ASSERT_EQ(t.size(), 1 + tr.time.size() * 3);
  EXPECT_EQ(t[0], (std::vector<std::string>{"time_h", "device_id", "theta_c"}));
  for (std::size_t i = 1; i < t.size(); ++i) {
    const std::size_t k = (i - 1) / 3, d = (i - 1) % 3;
    ASSERT_EQ(std::stod(t[i][0]), tr.time[k]);
    ASSERT_EQ(std::stoul(t[i][1]), tr.sampled_devices[d]);
    ASSERT_EQ(std::stod(t[i][2]), tr.device_temps[d][k]);
  }
  std::istringstream events(output::events_csv(tr));
  const auto e = output::read_csv(events);
  ASSERT_EQ(e.size(), tr.ledger.size() + 1);
  for (std::size_t i = 0; i < tr.ledger.size(); ++i) {
    const auto& ev = tr.ledger.events()[i];
    ASSERT_EQ(std::stod(e[i + 1][0]), ev.time);
    ASSERT_EQ(e[i + 1][1], ev.direction == Direction::up ? "up" : "down");
    ASSERT_EQ(std::stod(e[i + 1][2]), ev.delta_kw);
  }
}

TEST(Csv, MetricsRowsPerWindow) {
  const auto c = small(false);
  const auto tr = run(c);
  const auto w = period_windows(c);
  std::istringstream in(output::metrics_csv(tr, w));
  const auto rows = output::read_csv(in);
  ASSERT_EQ(rows.size(), w.size() + 1);
  EXPECT_EQ(rows[0].size(), 6u);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto a = oscillation_amplitude(tr, w[i].first, w[i].second);
    ASSERT_EQ(std::stod(rows[i + 1][3]), a.peak_to_peak);
    const double r = std::stod(rows[i + 1][2]);
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 1.0);
  }
}

TEST(Csv, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, -0.0, 5.6}) {
    EXPECT_EQ(std::stod(output::format_number(v)), v);
  }
}

TEST(ArtifactWriter, CommitPublishesWithChecksums) {
  const auto dir = fresh_dir("commit");
  output::ArtifactWriter w(dir);
  w.add("a.csv", "x,y\n1,2\n");
  EXPECT_FALSE(fs::exists(dir / "a.csv"));
  const auto arts = w.commit();
  ASSERT_EQ(arts.size(), 1u);
  EXPECT_EQ(slurp(dir / "a.csv"), "x,y\n1,2\n");
  EXPECT_EQ(arts[0].sha256, output::sha256_hex("x,y\n1,2\n"));
  EXPECT_EQ(arts[0].bytes, 8u);
}

TEST(ArtifactWriter, AbandonedWritesLeaveNothing) {
  const auto dir = fresh_dir("abandon");
  {
    output::ArtifactWriter w(dir);
    w.add("a.csv", "data");
    w.add("b.csv", "more");
  }
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(ArtifactWriter, UnwritableDirectoryThrows) {
  const auto dir = fresh_dir("blocked");
  fs::create_directories(dir.parent_path());
  std::ofstream(dir) << "a file, not a directory";
  EXPECT_THROW(output::ArtifactWriter w(dir / "sub"), output::IoError);
}

TEST(Manifest, SameSeedSameChecksums) {
  auto digest = [](const SimulationTrace& tr) {
    return output::sha256_hex(output::power_csv(tr)) +
           output::sha256_hex(output::events_csv(tr)) +
           output::sha256_hex(output::temps_csv(tr));
  };
  const auto c = small(true);
  EXPECT_EQ(digest(run(c)), digest(run(c)));
  auto other = c;
  other.seed = 7;
  EXPECT_NE(digest(run(c)), digest(run(other)));
}

TEST(Manifest, JsonListsArtifacts) {
  output::RunManifest m;
  m.command = "simulate";
  m.config_path = "x.cfg";
  m.output_dir = "out";
  m.seed = 5;
  m.artifacts = {{"power.csv", "abc", 10}};
  const std::string j = output::manifest_json(m);
  EXPECT_NE(j.find("\"power.csv\""), std::string::npos);
  EXPECT_NE(j.find("\"sha256\": \"abc\""), std::string::npos);
  EXPECT_NE(j.find("\"seed\": 5"), std::string::npos);
}
