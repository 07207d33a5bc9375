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

#include "freeflyer/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include <gtest/gtest.h>

#include "freeflyer/errors.hpp"
#include "oracles.hpp"

namespace freeflyer {
namespace {

namespace fs = std::filesystem;

const std::string kOnePart = R"(name: one_part
seed: 5
start:
  position: [1.0, -0.8, 0.0]
printer:
  center: [0.0, 0.0, 0.0]
  semi_axes: [0.3, 0.3, 0.3]
  safety_factor: 1.5
parts:
  semi_axes: [0.12, 0.12, 0.12]
  goals:
    - {name: only, position: [2.2, 0.0, 0.0]}
planner:
  lower: [-1.0, -1.5, -0.75]
  upper: [3.0, 1.5, 0.75]
)";

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("freeflyer_harness_test_" + name);
  fs::remove_all(d);
  return d;
}

// Relative path to file content for every file below dir.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = read_text_file(e.path().string());
    }
  }
  return files;
}

int line_count(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

const AssemblyReport& one_part_report() {
  static const AssemblyReport report = run_assembly(parse_scenario(kOnePart));
  return report;
}

TEST(ScenarioTest, MinimalFileGetsDefaults) {
  const ScenarioConfig c = parse_scenario("name: minimal\nseed: 11\n");
  EXPECT_EQ(c.name, "minimal");
  EXPECT_EQ(c.seed_or_throw(), 11u);
  EXPECT_TRUE(c.parts.empty());
  EXPECT_FALSE(c.printer.has_value());
  EXPECT_EQ(c.planner.max_iterations, PlannerSettings{}.max_iterations);
  EXPECT_EQ(c.shortcut.iterations, 200);
  EXPECT_EQ(c.mpc.horizon, 10);
  EXPECT_EQ(c.link_length, 0.15);
  EXPECT_EQ(c.model().nx(), 16);
  EXPECT_EQ(c.start_state(c.model()), Vector::Zero(16));
}

TEST(ScenarioTest, ResolvedDumpRoundTrips) {
  const ScenarioConfig c = parse_scenario(kOnePart);
  const std::string dumped = dump_scenario(c);
  EXPECT_EQ(dump_scenario(parse_scenario(dumped)), dumped);
  EXPECT_NE(dumped.find("max_iterations"), std::string::npos);
}

TEST(ScenarioTest, OverlappingGoalsNameBothParts) {
  const std::string text = R"(seed: 1
start:
  position: [1.0, -1.0, 0.0]
printer:
  center: [0.0, 0.0, 0.0]
  semi_axes: [0.3, 0.3, 0.3]
parts:
  goals:
    - {name: left, position: [2.0, 0.0, 0.0]}
    - {name: right, position: [2.1, 0.0, 0.0]}
)";
  try {
    parse_scenario(text);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("'left'"), std::string::npos) << what;
    EXPECT_NE(what.find("'right'"), std::string::npos) << what;
  }
}

TEST(ScenarioTest, UnknownKeyIsParseErrorWithLineAndField) {
  try {
    parse_scenario("seed: 1\nplanner:\n  max_iterations: 10\n  gama: 3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
    EXPECT_EQ(e.field(), "planner.gama");
  }
}

TEST(ScenarioTest, MalformedValueIsParseError) {
  try {
    parse_scenario("seed: 1\nstart:\n  position: [1.0, two, 3.0]\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.field(), "start.position");
  }
}

TEST(ScenarioTest, MissingSeedIsRejected) {
  EXPECT_THROW(parse_scenario("name: no_seed\n"), ValidationError);
}

TEST(ScenarioTest, MissingFileIsConfigError) {
  EXPECT_THROW(load_scenario("/nonexistent/scenario.yaml"), ConfigError);
}

TEST(ScenarioTest, PyramidHasTwoLayersAndApex) {
  const ScenarioConfig c = load_scenario(std::string(FREEFLYER_SOURCE_DIR) +
                                         "/scenarios/pyramid10.yaml");
  ASSERT_EQ(c.parts.size(), 10u);
  int bottom = 0, middle = 0, apex = 0;
  for (const auto& p : c.parts) {
    if (std::abs(p.goal.z()) < 1e-9) {
      ++bottom;
    } else if (std::abs(p.goal.z() - 0.4899) < 1e-9) {
      ++middle;
    } else if (std::abs(p.goal.z() - 0.9798) < 1e-9) {
      ++apex;
    }
  }
  EXPECT_EQ(bottom, 6);
  EXPECT_EQ(middle, 3);
  EXPECT_EQ(apex, 1);
  // Each layer is placed before the next one starts.
  for (std::size_t i = 1; i < c.parts.size(); ++i) {
    EXPECT_LE(c.parts[i - 1].goal.z(), c.parts[i].goal.z());
  }
  ASSERT_TRUE(c.printer.has_value());
}

TEST(AssemblyTest, ZeroPartScenarioIsEmptySuccess) {
  const AssemblyReport r = run_assembly(parse_scenario("name: empty\nseed: 2\n"));
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.parts_total, 0);
  EXPECT_EQ(r.parts_placed, 0);
  EXPECT_TRUE(r.phases.empty());

  const fs::path d = scratch_dir("empty");
  export_run(r, d.string());
  for (const auto& [name, text] : snapshot(d)) {
    if (name.ends_with(".csv")) {
      EXPECT_EQ(line_count(text), 1) << name;
    }
  }
  fs::remove_all(d);
}

TEST(AssemblyTest, OnePartSucceedsWithClearance) {
  const AssemblyReport& r = one_part_report();
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.parts_placed, 1);
  EXPECT_TRUE(r.audit_pass);
  EXPECT_GE(r.min_clearance, 1.0);
  ASSERT_EQ(r.phases.size(), 5u);
  for (std::size_t i = 0; i < r.phases.size(); ++i) {
    EXPECT_EQ(r.phases[i].phase, kPhaseOrder[i]);
    EXPECT_TRUE(r.phases[i].success) << to_string(r.phases[i].phase) << ": "
                                     << r.phases[i].message;
    EXPECT_LT(replay_error(oracle::astrobee_model(), r.phases[i].executed), 1e-9);
  }
  EXPECT_EQ(r.obstacle_counts, (std::vector<int>{1, 2}));
}

TEST(AssemblyTest, GraspAndRetractArmAngles) {
  const AssemblyReport& r = one_part_report();
  const ScenarioConfig c = parse_scenario(kOnePart);
  for (const auto& p : r.phases) {
    if (p.phase == AssemblyPhase::kGrasp) {
      EXPECT_NEAR(p.executed.back()[6], c.assembly.grasp_angle, c.assembly.joint_tolerance);
    }
    if (p.phase == AssemblyPhase::kRetract) {
      EXPECT_NEAR(p.executed.back()[6], c.assembly.retract_angle, c.assembly.joint_tolerance);
    }
  }
}

TEST(AssemblyTest, RepeatedRunIsIdentical) {
  const AssemblyReport& a = one_part_report();
  const AssemblyReport b = run_assembly(parse_scenario(kOnePart));
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_EQ(report_json(a, false), report_json(b, false));

  const fs::path da = scratch_dir("run_a"), db = scratch_dir("run_b");
  export_run(a, da.string());
  export_run(b, db.string());
  const auto fa = snapshot(da), fb = snapshot(db);
  ASSERT_EQ(fa.size(), fb.size());
  for (const auto& [name, text] : fa) {
    // These two carry wall-clock solve times.
    if (name == "report.json" || name == "diagnostics.csv") continue;
    EXPECT_EQ(text, fb.at(name)) << name;
  }
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST(ExportTest, ReExportIsByteIdentical) {
  const AssemblyReport& r = one_part_report();
  const fs::path a = scratch_dir("export_a"), b = scratch_dir("export_b");
  export_run(r, a.string());
  export_run(r, b.string());
  EXPECT_EQ(snapshot(a), snapshot(b));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(ExportTest, RowCountIsKnotsPlusHeader) {
  const AssemblyReport& r = one_part_report();
  const fs::path d = scratch_dir("rows");
  export_run(r, d.string());
  const auto files = snapshot(d);
  EXPECT_EQ(line_count(files.at("executed.csv")), r.executed().knots() + 1);
  EXPECT_EQ(line_count(files.at("base_translation.csv")), r.executed().knots() + 1);
  for (const auto& p : r.phases) {
    char name[64];
    std::snprintf(name, sizeof(name), "phases/part%02d_%s.csv", p.part + 1,
                  to_string(p.phase).c_str());
    EXPECT_EQ(line_count(files.at(name)), p.executed.knots() + 1) << name;
  }
  const Trajectory back = trajectory_from_csv(files.at("executed.csv"), 16, 8);
  EXPECT_EQ(back.knots(), r.executed().knots());
  fs::remove_all(d);
}

TEST(ExportTest, UnwritableDirectoryIsError) {
  EXPECT_THROW(export_run(one_part_report(), "/proc/freeflyer_cannot_write"), Error);
}

}  // namespace
}  // namespace freeflyer
