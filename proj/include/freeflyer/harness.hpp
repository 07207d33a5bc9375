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

#ifndef FREEFLYER_HARNESS_HPP_
#define FREEFLYER_HARNESS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "freeflyer/collision.hpp"
#include "freeflyer/lqr.hpp"
#include "freeflyer/nmpc.hpp"
#include "freeflyer/planner.hpp"
#include "freeflyer/robot.hpp"
#include "freeflyer/smoother.hpp"
#include "freeflyer/trajectory.hpp"

namespace freeflyer {

struct EllipsoidSpec {
  std::string name;
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes = Vec3::Constant(0.1);
  double safety_factor = 1.0;

  EllipsoidObstacle obstacle() const;
};

struct PartSpec {
  std::string name;
  Vec3 goal = Vec3::Zero();
};

// Diagonal quadratic weights: q_config on positions, attitude and joints,
// q_velocity on their rates, r on every control.
struct DiagonalWeights {
  double q_config = 10.0;
  double q_velocity = 1.0;
  double r = 0.008;
  double terminal_scale = 1.0;

  Matrix Q(int nq) const;
  Matrix QN(int nq) const;
  Matrix R(int nu) const;
  QuadraticCost cost(int nq, int nu) const;
};

struct PlannerSettings {
  double gamma = 40.0;
  int max_iterations = 1500;
  double goal_bias = 0.05;
  double h = 0.5;
  double v_max = 0.25;
  int metric_horizon = 10;
  int max_near = 8;
  bool stop_at_first = true;
  double inflation = 1.3;  // safety-factor multiplier while planning and shortcutting
  Vec3 lower = Vec3(-1.0, -1.5, -0.75);
  Vec3 upper = Vec3(4.5, 1.5, 1.5);

  // Planner configuration for a base move from `start` within these bounds.
  PlannerConfig config(const MultibodyModel& model, const Vector& start,
                       std::uint64_t seed) const;
};

struct AssemblySettings {
  double grasp_angle = 0.7853981633974483;  // rad
  double retract_angle = 0.0;               // rad
  double attach_tolerance = 0.02;           // m, tool to part centre
  double joint_tolerance = 0.01;            // rad
  double place_hold = 1.0;                  // s
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::optional<std::uint64_t> seed;
  std::string output_dir;

  // Robot: a description file, or the default free-flyer with this link length.
  std::string robot_file;
  double link_length = 0.15;
  RobotDescription robot;

  Vec3 start_position = Vec3::Zero();
  Vec3 start_euler = Vec3::Zero();
  Vector start_joints;  // empty = zeros

  // Goal for standalone planning (the CLI `plan` subcommand).
  std::optional<Vec3> goal_position;

  std::optional<EllipsoidSpec> printer;
  Vec3 printer_output = Vec3(0.8, 0.0, 0.0);  // where printed parts are picked up
  Vec3 part_semi_axes = Vec3::Constant(0.12);
  double part_safety_factor = 1.5;
  std::vector<PartSpec> parts;
  std::vector<EllipsoidSpec> obstacles;  // static clutter

  PlannerSettings planner;
  ShortcutConfig shortcut;
  RetimeConfig retime;
  DiagonalWeights lqr;
  MpcConfig mpc;
  DiagonalWeights mpc_weights = {100.0, 10.0, 0.01, 1.0};
  AssemblySettings assembly;

  std::uint64_t seed_or_throw() const;
  MultibodyModel model() const;
  Vector start_state(const MultibodyModel& model) const;
  EllipsoidObstacle part_obstacle(int i) const;
  // Printer plus static clutter.
  ObstacleField static_field() const;
  MpcConfig resolved_mpc(const MultibodyModel& model) const;

  // Throws ValidationError naming the violated invariant.
  void validate() const;
};

// Parses YAML text. Unknown keys and malformed values raise ParseError with
// the line and field. Relative robot files resolve against base_dir.
ScenarioConfig parse_scenario(const std::string& yaml_text, const std::string& base_dir = "");
ScenarioConfig load_scenario(const std::string& path);
// Every field with defaults resolved, as YAML.
std::string dump_scenario(const ScenarioConfig& config);

enum class AssemblyPhase { kMoveToPrinter, kGrasp, kMoveToGoal, kPlace, kRetract };

std::string to_string(AssemblyPhase phase);
inline constexpr AssemblyPhase kPhaseOrder[] = {
    AssemblyPhase::kMoveToPrinter, AssemblyPhase::kGrasp, AssemblyPhase::kMoveToGoal,
    AssemblyPhase::kPlace, AssemblyPhase::kRetract};

struct PhaseReport {
  int part = 0;
  AssemblyPhase phase = AssemblyPhase::kMoveToPrinter;
  bool success = false;
  std::string message;

  int obstacles = 0;           // field size while the phase ran
  int planner_iterations = 0;  // 0 when the phase does not plan
  int planner_nodes = 0;
  double planner_cost = 0.0;
  double path_length = 0.0;     // before shortcutting
  double smoothed_length = 0.0;
  int shortcuts = 0;

  double duration = 0.0;        // s of simulated time
  double min_clearance = 0.0;   // over executed knots, true obstacle sizes
  bool audit_pass = true;       // dense segment audit of the executed base path
  double tracking_rms = 0.0;    // executed vs reference base position, m
  double joint_error = 0.0;     // max |q - commanded| at the end of the phase
  double tool_error = 0.0;      // grasp and place only
  double max_violation = 0.0;
  int inner_iterations = 0;
  bool mpc_converged = true;

  double mean_solve_ms = 0.0;   // timing, excluded from the hash
  double max_solve_ms = 0.0;

  Trajectory reference;
  Trajectory executed;
  std::vector<MpcDiagnostics> diagnostics;
};

struct AssemblyReport {
  std::string scenario;
  std::uint64_t seed = 0;
  int num_joints = 0;
  double h = 0.0;
  int parts_total = 0;
  int parts_placed = 0;
  bool success = true;
  std::vector<PhaseReport> phases;
  // Field size after each placement, starting with the initial field.
  std::vector<int> obstacle_counts;

  double min_clearance = 0.0;
  bool audit_pass = true;
  double max_grasp_joint_error = 0.0;
  int mpc_steps = 0;
  double mean_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  double wall_seconds = 0.0;
  std::string hash;

  // All executed phases, concatenated.
  Trajectory executed() const;
};

struct RunOptions {
  bool strict = false;  // stop at the first failed phase
  std::function<void(const std::string&)> log;
};

AssemblyReport run_assembly(const ScenarioConfig& config, const RunOptions& options = {});

// Report content as JSON text. Timing fields appear only when requested.
std::string report_json(const AssemblyReport& report, bool include_timing);
// FNV-1a over the timing-free JSON and every executed trajectory.
std::string report_hash(const AssemblyReport& report);

// Writes report.json, diagnostics.csv, executed.csv, one CSV per phase under
// phases/, and the per-axis series base_translation.csv, base_attitude.csv and
// manipulator.csv. Throws Error with the OS message on I/O failure.
void export_run(const AssemblyReport& report, const std::string& dir);

// Per-axis series of a trajectory (t plus the selected state coordinates).
std::string series_csv(const Trajectory& traj, const std::vector<std::string>& names,
                       int first, int count);
void export_series(const Trajectory& traj, int num_joints, const std::string& dir);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace freeflyer

#endif  // FREEFLYER_HARNESS_HPP_
