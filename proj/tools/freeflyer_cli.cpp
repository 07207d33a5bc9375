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

// Command-line front end: every pipeline stage can run on its own from files.
//
//   freeflyer plan     --scenario S [--start x,y,z] [--goal x,y,z]  -> plan.csv
//   freeflyer smooth   --scenario S --input plan.csv               -> smoothed.csv
//   freeflyer track    --scenario S --input reference.csv          -> tracked.csv
//   freeflyer mpc      --scenario S --input reference.csv          -> mpc.csv
//   freeflyer simulate --scenario S                                 -> full run
//   freeflyer export   --input trajectory.csv                       -> per-axis series
//
// Exit codes: 0 success, 1 phase failure, 2 configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"
#include "freeflyer/harness.hpp"

namespace ff = freeflyer;

namespace {

constexpr int kOk = 0;
constexpr int kPhaseFailure = 1;
constexpr int kConfigError = 2;

struct Globals {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

struct StageArgs {
  std::string input;
  std::vector<double> start;
  std::vector<double> goal;
  int iterations = -1;
};

void info(const std::string& msg) { std::cerr << msg << "\n"; }

ff::ScenarioConfig scenario(const Globals& g) {
  if (g.scenario.empty()) throw ff::ConfigError("--scenario is required for this subcommand");
  ff::ScenarioConfig c = ff::load_scenario(g.scenario);
  if (g.seed) {
    c.seed = g.seed;
    c.validate();
  }
  return c;
}

std::filesystem::path out_dir(const Globals& g) {
  std::error_code ec;
  std::filesystem::create_directories(g.out, ec);
  if (ec) throw ff::Error("cannot create '" + g.out + "': " + ec.message());
  return g.out;
}

ff::Vec3 vec3_arg(const std::vector<double>& v, const ff::Vec3& def, const char* name) {
  if (v.empty()) return def;
  if (v.size() != 3) throw ff::ConfigError(std::string(name) + " needs three numbers");
  return ff::Vec3(v[0], v[1], v[2]);
}

ff::Trajectory read_trajectory(const std::string& path, const ff::MultibodyModel& model) {
  if (path.empty()) throw ff::ConfigError("--input is required for this subcommand");
  ff::Trajectory t = ff::trajectory_from_csv(ff::read_text_file(path), model.nx(), model.nu());
  if (t.empty()) throw ff::ConfigError("trajectory '" + path + "' has no rows");
  if (t.knots() == 1) t.h = 0.2;
  t.check(model.nx(), model.nu());
  return t;
}

void write_trajectory(const std::filesystem::path& path, const ff::Trajectory& t, int nu) {
  ff::write_text_file(path.string(), ff::trajectory_to_csv(t, nu));
  info("wrote " + path.string() + " (" + std::to_string(t.knots()) + " knots)");
}

int run_plan(const Globals& g, const StageArgs& a) {
  const ff::ScenarioConfig c = scenario(g);
  const ff::MultibodyModel model = c.model();
  const ff::Vector start0 = c.start_state(model);
  const ff::Vec3 start_pos = vec3_arg(a.start, c.start_position, "--start");
  if (a.goal.empty() && !c.goal_position) {
    throw ff::ConfigError("no goal: pass --goal or set goal.position in the scenario");
  }
  const ff::Vec3 goal_pos = vec3_arg(a.goal, c.goal_position.value_or(ff::Vec3::Zero()), "--goal");
  ff::Vector start = start0, goal = start0;
  start.head<3>() = start_pos;
  goal.head<3>() = goal_pos;

  ff::PlannerConfig pc = c.planner.config(model, start, c.seed_or_throw());
  if (a.iterations >= 0) pc.max_iterations = a.iterations;
  const ff::ObstacleField field = c.static_field().inflated(c.planner.inflation);

  try {
    const ff::PlanResult r = ff::plan(model, start, goal, field, pc);
    std::printf("plan: cost %.6g, %d knots, %d nodes, %d iterations, first solution at %d\n",
                r.cost, r.trajectory.knots(), r.tree.size(), r.iterations,
                r.first_solution_iteration);
    write_trajectory(out_dir(g) / "plan.csv", r.trajectory, model.nu());
    return kOk;
  } catch (const ff::NoPathError& e) {
    info(std::string("plan failed: ") + e.what());
    return kPhaseFailure;
  }
}

int run_smooth(const Globals& g, const StageArgs& a) {
  const ff::ScenarioConfig c = scenario(g);
  const ff::MultibodyModel model = c.model();
  const ff::Trajectory in = read_trajectory(a.input, model);
  const ff::ObstacleField field = c.static_field().inflated(c.planner.inflation);
  ff::ShortcutConfig sc = c.shortcut;
  sc.seed = c.seed_or_throw();
  const ff::GeometricPath raw = ff::GeometricPath::from_trajectory(in);
  const ff::ShortcutResult s = ff::shortcut(raw, field, sc);
  const ff::Trajectory ref =
      ff::retime(model, s.path, c.lqr.cost(model.nq(), model.nu()), c.retime);
  std::printf("smooth: length %.6g -> %.6g (%d shortcuts), %d knots, replay %.3g\n",
              raw.length(), s.path.length(), s.accepted, ref.knots(),
              ff::replay_error(model, ref));
  write_trajectory(out_dir(g) / "smoothed.csv", ref, model.nu());
  return kOk;
}

int run_track(const Globals& g, const StageArgs& a) {
  const ff::ScenarioConfig c = scenario(g);
  const ff::MultibodyModel model = c.model();
  const ff::Trajectory ref = read_trajectory(a.input, model);
  const ff::Trajectory t =
      ff::track(model, ref, c.lqr.cost(model.nq(), model.nu()), ref.front());
  std::printf("track: final error %.3g, replay %.3g\n",
              (t.back() - ref.back()).cwiseAbs().maxCoeff(), ff::replay_error(model, t));
  write_trajectory(out_dir(g) / "tracked.csv", t, model.nu());
  return kOk;
}

int run_mpc(const Globals& g, const StageArgs& a) {
  const ff::ScenarioConfig c = scenario(g);
  const ff::MultibodyModel model = c.model();
  const ff::Trajectory ref = read_trajectory(a.input, model);
  const ff::ObstacleField field = c.static_field();
  const ff::RecedingHorizonResult r =
      ff::run_receding_horizon(model, ref.front(), ref, field, c.resolved_mpc(model));
  const auto dir = out_dir(g);
  write_trajectory(dir / "mpc.csv", r.executed, model.nu());
  std::string diag = "step,solve_ms,inner,outer,residual,max_violation,converged\n";
  for (const auto& d : r.diagnostics) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%d,%.17g,%.17g,%d\n", d.step, d.solve_ms,
                  d.inner, d.outer, d.residual, d.max_violation, d.converged ? 1 : 0);
    diag += buf;
  }
  ff::write_text_file((dir / "diagnostics.csv").string(), diag);
  bool clear = true;
  for (int k = 0; k + 1 < r.executed.knots() && !field.empty(); ++k) {
    clear = clear && ff::segment_clear(field, r.executed.states[k].head<3>(),
                                       r.executed.states[k + 1].head<3>(),
                                       field.default_check_resolution());
  }
  std::printf("mpc: %d steps, mean solve %.3f ms, max violation %.3g, audit %s\n",
              static_cast<int>(r.diagnostics.size()), r.mean_solve_ms(), r.max_violation(),
              clear ? "pass" : "FAIL");
  return clear ? kOk : kPhaseFailure;
}

int run_simulate(const Globals& g) {
  const ff::ScenarioConfig c = scenario(g);
  const auto dir = out_dir(g);
  const std::string resolved = ff::dump_scenario(c);
  ff::write_text_file((dir / "scenario_resolved.yaml").string(), resolved);
  info("resolved scenario:\n" + resolved);

  ff::RunOptions opts;
  opts.strict = g.strict;
  opts.log = info;
  const ff::AssemblyReport r = ff::run_assembly(c, opts);
  ff::export_run(r, dir.string());
  std::printf(
      "simulate: %d/%d parts placed, audit %s, min clearance %.4g, mean solve %.3f ms, "
      "hash %s\n",
      r.parts_placed, r.parts_total, r.audit_pass ? "pass" : "FAIL",
      r.phases.empty() ? 0.0 : r.min_clearance, r.mean_solve_ms, r.hash.c_str());
  return r.success ? kOk : kPhaseFailure;
}

int run_export(const Globals& g, const StageArgs& a) {
  if (a.input.empty()) throw ff::ConfigError("--input is required for export");
  const std::string text = ff::read_text_file(a.input);
  const std::string header = text.substr(0, text.find('\n'));
  const int columns = static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
  if (columns < 19 || (columns - 1) % 3 != 0) {
    throw ff::ConfigError("'" + a.input + "' is not a trajectory table");
  }
  const int nq = (columns - 1) / 3;
  ff::Trajectory t = ff::trajectory_from_csv(text, 2 * nq, nq);
  ff::export_series(t, nq - 6, out_dir(g).string());
  std::printf("export: %d knots written to %s\n", t.knots(), g.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-flyer assembly planning, smoothing, tracking and simulation"};
  app.require_subcommand(1);
  Globals g;
  StageArgs a;
  std::uint64_t seed = 0;
  app.add_option("--scenario", g.scenario, "Scenario YAML file");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_flag("--strict", g.strict, "Stop at the first failed phase");

  auto* plan = app.add_subcommand("plan", "Plan a base trajectory between two positions");
  plan->add_option("--start", a.start, "Start position x y z (default: scenario start)")
      ->expected(3);
  plan->add_option("--goal", a.goal, "Goal position x y z (default: scenario goal)")->expected(3);
  plan->add_option("--iterations", a.iterations, "Override planner.max_iterations");
  auto* smooth = app.add_subcommand("smooth", "Shortcut and retime a planned trajectory");
  smooth->add_option("--input", a.input, "Trajectory CSV")->required();
  auto* track = app.add_subcommand("track", "LQR tracking of a reference trajectory");
  track->add_option("--input", a.input, "Reference CSV")->required();
  auto* mpc = app.add_subcommand("mpc", "Receding-horizon tracking of a reference trajectory");
  mpc->add_option("--input", a.input, "Reference CSV")->required();
  auto* simulate = app.add_subcommand("simulate", "Run the full assembly scenario");
  auto* exp = app.add_subcommand("export", "Write per-axis series of a trajectory CSV");
  exp->add_option("--input", a.input, "Trajectory CSV")->required();
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*plan) return run_plan(g, a);
    if (*smooth) return run_smooth(g, a);
    if (*track) return run_track(g, a);
    if (*mpc) return run_mpc(g, a);
    if (*simulate) return run_simulate(g);
    if (*exp) return run_export(g, a);
  } catch (const ff::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ff::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPhaseFailure;
  }
  return kConfigError;
}
