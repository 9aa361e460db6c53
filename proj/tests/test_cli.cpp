#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tcl/output.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::path(TCL_TEST_TMP) / "cli";

int tclsim(const std::string& args) {
  const std::string cmd = std::string(TCLSIM_BIN) + " " + args + " > " +
                          (kTmp / "stdout.txt").string() + " 2> " +
                          (kTmp / "stderr.txt").string();
  fs::create_directories(kTmp);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_cfg(const std::string& name, const std::string& body) {
  fs::create_directories(kTmp);
  const fs::path p = kTmp / name;
  std::ofstream(p) << body;
  return p;
}

const char* kSmall = R"([population]
n_devices = 30
horizon = 12
[protocol]
enabled = true
[broadcasts]
step = 10 0.5
[output]
temperature_sample = 2
)";

}  // namespace

TEST(Cli, SimulateWritesArtifactsAndManifest) {
  const auto cfg = write_cfg("small.cfg", kSmall);
  const auto out = kTmp / "sim";
  fs::remove_all(out);
  ASSERT_EQ(tclsim("simulate " + cfg.string() + " --output-dir " + out.string()), 0);
  for (const char* f : {"power.csv", "temps.csv", "events.csv", "metrics.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const std::string manifest = slurp(out / "manifest.json");
  EXPECT_NE(manifest.find(tcl::output::sha256_hex(slurp(out / "power.csv"))), std::string::npos);
  for (const auto& e : fs::directory_iterator(out)) {
    EXPECT_EQ(e.path().extension() == ".tmp", false) << e.path();
  }
}

TEST(Cli, SimulateIsReproducible) {
  const auto cfg = write_cfg("small.cfg", kSmall);
  const auto a = kTmp / "rep_a", b = kTmp / "rep_b";
  ASSERT_EQ(tclsim("simulate " + cfg.string() + " --seed 9 --output-dir " + a.string()), 0);
  ASSERT_EQ(tclsim("--seed 9 simulate " + cfg.string() + " --output-dir " + b.string()), 0);
  for (const char* f : {"power.csv", "temps.csv", "events.csv", "metrics.csv"}) {
    EXPECT_EQ(tcl::output::sha256_hex(slurp(a / f)), tcl::output::sha256_hex(slurp(b / f))) << f;
  }
  EXPECT_NE(slurp(a / "manifest.json").find("\"seed\": 9"), std::string::npos);
}

TEST(Cli, OutputDirFromEnvironment) {
  const auto cfg = write_cfg("small.cfg", kSmall);
  const auto out = kTmp / "from_env";
  fs::remove_all(out);
  const std::string env = "TCLSIM_OUTPUT_DIR=" + out.string() + " ";
  const std::string cmd = env + TCLSIM_BIN + " simulate " + cfg.string() + " > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(out / "power.csv"));
}

TEST(Cli, InvalidConfigExitsTwoWithLine) {
  const auto cfg = write_cfg("bad.cfg", "[population]\nn_devices = 30\nhorizon = soon\n");
  EXPECT_EQ(tclsim("simulate " + cfg.string() + " --output-dir " + (kTmp / "bad").string()), 2);
  EXPECT_NE(slurp(kTmp / "stderr.txt").find("bad.cfg:3:"), std::string::npos);
  EXPECT_FALSE(fs::exists(kTmp / "bad" / "power.csv"));
}

TEST(Cli, IoFailureExitsThree) {
  const auto cfg = write_cfg("small.cfg", kSmall);
  EXPECT_EQ(tclsim("simulate " + (kTmp / "missing.cfg").string()), 3);
  const auto blocker = kTmp / "blocker";
  std::ofstream(blocker) << "x";
  EXPECT_EQ(tclsim("simulate " + cfg.string() + " --output-dir " + (blocker / "sub").string()), 3);
}

TEST(Cli, AnalyzeConvergence) {
  const auto out = kTmp / "conv";
  ASSERT_EQ(tclsim("analyze-convergence --n 4 --period 1 --output-dir " + out.string()), 0);
  std::istringstream in(slurp(out / "convergence.csv"));
  const auto rows = tcl::output::read_csv(in);
  ASSERT_GT(rows.size(), 2u);
  EXPECT_LT(std::stod(rows.back()[1]), 1e-9);
  const std::string checks = slurp(out / "gamma_checks.csv");
  EXPECT_EQ(checks.find("false"), std::string::npos);
  EXPECT_NE(slurp(kTmp / "stdout.txt").find("0 0.25 0.5 0.75"), std::string::npos);
}

TEST(Cli, AnalyzeToleranceViolationExitsOne) {
  // Three iterations cannot reach the fixed point for N = 32.
  EXPECT_EQ(tclsim("analyze-convergence --n 32 --period 1 --max-iters 3 --output-dir " +
                   (kTmp / "capped").string()),
            1);
}

TEST(Cli, AnalyzeInvalidArgsExitTwo) {
  EXPECT_EQ(tclsim("analyze-convergence --n 1 --period 1"), 2);
  EXPECT_EQ(tclsim("analyze-convergence --n 4 --period -1"), 2);
  EXPECT_EQ(tclsim("analyze-convergence --n four --period 1"), 2);
  EXPECT_EQ(tclsim("analyze-convergence --period 1"), 2);
}

TEST(Cli, SingleTcl) {
  const auto out = kTmp / "single";
  ASSERT_EQ(tclsim("single-tcl --horizon 12 --step-time 10 --output-dir " + out.string()), 0);
  EXPECT_NE(slurp(kTmp / "stdout.txt").find("period 1.75173"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "single_tcl.csv"));
  EXPECT_TRUE(fs::exists(out / "cycle.csv"));
  EXPECT_EQ(tclsim("single-tcl --ambient 15"), 2);
  EXPECT_NE(slurp(kTmp / "stderr.txt").find("limit cycle"), std::string::npos);
}
