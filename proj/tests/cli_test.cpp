// Copyright 2026 The freeflyer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "freeflyer/harness.hpp"

namespace freeflyer {
namespace {

namespace fs = std::filesystem;

const char kScenario[] = R"(name: cli_small
seed: 4
start:
  position: [0.0, 0.0, 0.0]
goal:
  position: [1.0, 0.4, 0.0]
obstacles:
  - {name: box, center: [2.5, 0.0, 0.0], semi_axes: [0.3, 0.3, 0.3]}
planner:
  max_iterations: 400
  lower: [-1.0, -1.0, -0.5]
  upper: [3.0, 1.0, 0.5]
)";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("freeflyer_cli_test_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    scenario_ = (dir_ / "scenario.yaml").string();
    write_text_file(scenario_, kScenario);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of the CLI run with the given arguments.
  int run(const std::string& args) const {
    const std::string cmd = std::string(FREEFLYER_CLI) + " " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string common() const { return "--scenario " + scenario_ + " --out " + out(); }
  std::string out() const { return (dir_ / "out").string(); }

  fs::path dir_;
  std::string scenario_;
};

TEST_F(CliTest, NoSubcommandIsConfigError) { EXPECT_EQ(run(""), 2); }

TEST_F(CliTest, UnknownFlagIsConfigError) { EXPECT_EQ(run(common() + " plan --bogus"), 2); }

TEST_F(CliTest, MissingScenarioFileIsConfigError) {
  EXPECT_EQ(run("--scenario " + (dir_ / "missing.yaml").string() + " plan"), 2);
}

TEST_F(CliTest, InvalidScenarioIsConfigError) {
  write_text_file(scenario_, "name: broken\nseed: 1\nplanner:\n  gama: 2\n");
  EXPECT_EQ(run(common() + " plan"), 2);
}

TEST_F(CliTest, PipelineStagesRunStandalone) {
  ASSERT_EQ(run(common() + " plan"), 0);
  ASSERT_TRUE(fs::exists(out() + "/plan.csv"));
  ASSERT_EQ(run(common() + " smooth --input " + out() + "/plan.csv"), 0);
  ASSERT_TRUE(fs::exists(out() + "/smoothed.csv"));
  ASSERT_EQ(run(common() + " track --input " + out() + "/smoothed.csv"), 0);
  ASSERT_TRUE(fs::exists(out() + "/tracked.csv"));
  ASSERT_EQ(run(common() + " mpc --input " + out() + "/smoothed.csv"), 0);
  ASSERT_TRUE(fs::exists(out() + "/mpc.csv"));
  ASSERT_TRUE(fs::exists(out() + "/diagnostics.csv"));
  ASSERT_EQ(run(common() + " export --input " + out() + "/mpc.csv"), 0);
  EXPECT_TRUE(fs::exists(out() + "/base_translation.csv"));
  EXPECT_TRUE(fs::exists(out() + "/base_attitude.csv"));
  EXPECT_TRUE(fs::exists(out() + "/manipulator.csv"));
}

TEST_F(CliTest, SeedOverrideIsDeterministic) {
  ASSERT_EQ(run(common() + " --seed 9 plan"), 0);
  const std::string first = read_text_file(out() + "/plan.csv");
  ASSERT_EQ(run(common() + " --seed 9 plan"), 0);
  EXPECT_EQ(read_text_file(out() + "/plan.csv"), first);
}

TEST_F(CliTest, GoalInsideObstacleIsPhaseFailure) {
  EXPECT_EQ(run(common() + " plan --goal 2.5 0 0"), 1);
}

TEST_F(CliTest, MissingInputFileFails) {
  EXPECT_EQ(run(common() + " smooth --input " + (dir_ / "none.csv").string()), 1);
  const std::string output = read_text_file((dir_ / "stdout.txt").string());
  EXPECT_NE(output.find("No such file"), std::string::npos) << output;
}

TEST_F(CliTest, SimulateWritesRunArtifacts) {
  ASSERT_EQ(run(common() + " --strict simulate"), 0);
  EXPECT_TRUE(fs::exists(out() + "/scenario_resolved.yaml"));
  EXPECT_TRUE(fs::exists(out() + "/report.json"));
  EXPECT_TRUE(fs::exists(out() + "/executed.csv"));
}

}  // namespace
}  // namespace freeflyer
