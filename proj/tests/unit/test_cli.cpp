#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLFSTACK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string scenario(const std::string& name) {
  return std::string(CLFSTACK_SCENARIO_DIR) + "/" + name;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("clfstack_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run_cli("--help"), 0); }

TEST_F(Cli, MissingConfigIsValidationError) {
  EXPECT_EQ(run_cli("simulate --config " + (dir_ / "absent.json").string()), 1);
}

TEST_F(Cli, UnknownKeyIsValidationError) {
  const fs::path bad = dir_ / "bad.json";
  std::ifstream in(scenario("two_task_nullspace.json"));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  text.replace(text.find("\"kappa\""), 7, "\"kapa\"");
  std::ofstream(bad) << text;
  EXPECT_EQ(run_cli("simulate --config " + bad.string()), 1);
}

TEST_F(Cli, UnknownSuiteIsValidationError) { EXPECT_EQ(run_cli("verify nonsense"), 1); }

TEST_F(Cli, SimulateWritesArtifacts) {
  EXPECT_EQ(run_cli("simulate --config " + scenario("two_task_nullspace.json") + " --out " +
                    dir_.string()),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "phase_report.txt"));
  EXPECT_TRUE(fs::exists(dir_ / "values.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "trajectories.svg"));

  const fs::path plots = dir_ / "replot";
  fs::create_directories(plots);
  EXPECT_EQ(run_cli("plot --trace " + (dir_ / "trace.csv").string() + " --out " + plots.string()), 0);
  EXPECT_TRUE(fs::exists(plots / "values.svg"));
}

TEST_F(Cli, CompareNeedsLearnedGrid) {
  EXPECT_EQ(run_cli("compare-appendix-a --config " + scenario("double_integrator.json") + " --out " +
                    dir_.string()),
            1);
}

TEST_F(Cli, VerifySuitePasses) { EXPECT_EQ(run_cli("verify dynamics --quiet"), 0); }

}  // namespace
