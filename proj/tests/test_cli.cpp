#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "headsim/io.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status;
  std::string out;
};

/// Runs the CLI with stderr folded into stdout.
CliRun cli(const std::string& args) {
  const std::string cmd = std::string(HEADSIM_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  const int rc = pclose(p);
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, out};
}

std::string fixture(const std::string& name) { return std::string(HEADSIM_FIXTURES_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("headsim_cli_" + std::to_string(::getpid()) + "_" +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(cli("simulate --scene " + fixture("novel.json") + " --seed 4 --out " + path("a.csv")).status, 0);
  ASSERT_EQ(cli("simulate --scene " + fixture("novel.json") + " --seed 4 --out " + path("b.csv")).status, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  const auto t = headsim::load_trace(path("a.csv"));
  EXPECT_EQ(t.scenario, "novel");
  EXPECT_EQ(t.seed, 4u);
}

TEST_F(Cli, EvaluateSelfIsZero) {
  ASSERT_EQ(cli("simulate --scene " + fixture("hazard.json") + " --seed 2 --out " + path("t.csv")).status, 0);
  const CliRun r = cli("evaluate --reference " + path("t.csv") + " --candidate " + path("t.csv"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("hazard,candidate,APC,0.000000,0.000000,1,2"), std::string::npos) << r.out;
}

TEST_F(Cli, AblateSingleToggleRow) {
  const CliRun r = cli("ablate --scene " + fixture("hazard.json") + " --toggle no-safety --runs 1 --out " +
                    path("a.csv") + " --plot " + path("a.svg"));
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string csv = slurp(path("a.csv"));
  EXPECT_EQ(csv.rfind("scenario,method,condition,mean,ci95,n,seed\n", 0), 0u);
  EXPECT_NE(csv.find("hazard,w/o Safety driver,APC,"), std::string::npos) << csv;
  EXPECT_NE(slurp(path("a.svg")).find("<svg"), std::string::npos);
}

TEST_F(Cli, UnknownToggleIsSchemaError) {
  const CliRun r = cli("simulate --scene " + fixture("hazard.json") + " --toggle bogus --out " + path("x.csv"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("\"field\":\"toggle\""), std::string::npos) << r.out;
}

TEST_F(Cli, ValidateSceneReportsFieldPath) {
  std::ofstream(path("bad.json")) << R"({"version": "headsim-scene/1", "goal": {"text": "g", "position": [0, 0]}})";
  const CliRun r = cli("validate-scene --scene " + path("bad.json"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("\"field\":\"goal.position\""), std::string::npos) << r.out;
  EXPECT_EQ(cli("validate-scene --scene " + fixture("bus_apc.json")).status, 0);
}

TEST_F(Cli, BadConfigKeyIsRejected) {
  std::ofstream(path("cfg.json")) << R"({"tick": 0.2, "warp": 9})";
  const CliRun r = cli("simulate --scene " + fixture("hazard.json") + " --config " + path("cfg.json"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("\"field\":\"warp\""), std::string::npos) << r.out;
}

TEST_F(Cli, RemoteWithoutUrlFails) {
  const CliRun r = cli("simulate --backend remote --scene " + fixture("hazard.json") + " --out " + path("x.csv"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("HEADSIM_BACKEND_URL"), std::string::npos);
}

TEST_F(Cli, IngestUcyWritesSceneAndTraces) {
  std::ofstream(path("ann.txt")) << "1 - splines\n3 - points\n0 0 0 0\n50 0 25 0\n100 0 50 10\n";
  const CliRun r = cli("ingest-ucy --annotation " + path("ann.txt") + " --out " + path("scene.json") + " --traces " +
                    path("gt"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto scene = headsim::load_scene(path("scene.json"));
  ASSERT_EQ(scene.trajectories.size(), 1u);
  const auto gt = headsim::load_trace(path("gt/ped0.csv"));
  EXPECT_EQ(gt.rows.size(), 11u);
  // The ingested scene can be simulated directly.
  EXPECT_EQ(cli("simulate --scene " + path("scene.json") + " --out " + path("sim.csv")).status, 0);
}

TEST_F(Cli, AllAgentsWritesOneTracePerAgent) {
  std::ofstream(path("ann.txt")) << "2\n2\n0 0 0 0\n200 0 50 0\n2\n0 100 0 180\n200 100 50 180\n";
  ASSERT_EQ(cli("ingest-ucy --annotation " + path("ann.txt") + " --out " + path("scene.json")).status, 0);
  const CliRun r = cli("simulate --scene " + path("scene.json") + " --all-agents --out " + path("runs"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(path("runs/ped0.csv")));
  EXPECT_TRUE(fs::exists(path("runs/ped1.csv")));
}
