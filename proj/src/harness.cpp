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
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"

namespace freeflyer {

namespace {

using Json = nlohmann::ordered_json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t phase_seed(std::uint64_t seed, int part, AssemblyPhase phase, int salt) {
  return splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(part) << 16) |
                                      (static_cast<std::uint64_t>(phase) << 8) |
                                      static_cast<std::uint64_t>(salt)));
}

Vector at_rest(const Vector& x, int nq) {
  Vector r = x;
  r.tail(nq).setZero();
  return r;
}

Vector with_joints(const MultibodyModel& model, const Vector& x, double angle) {
  Vector r = x;
  r.segment(state::joints(model.num_joints()), model.num_joints()).setConstant(angle);
  return r;
}

Vector with_position(const Vector& x, const Vec3& p) {
  Vector r = x;
  r.head<3>() = p;
  return r;
}

double min_clearance(const ObstacleField& field, const Trajectory& traj) {
  double c = std::numeric_limits<double>::infinity();
  for (const auto& x : traj.states) c = std::min(c, clearance(field, x.head<3>()));
  return c;
}

bool audit(const ObstacleField& field, const Trajectory& traj) {
  if (field.empty()) return true;
  const double h_check = field.default_check_resolution();
  for (int k = 0; k + 1 < traj.knots(); ++k) {
    if (!segment_clear(field, traj.states[k].head<3>(), traj.states[k + 1].head<3>(), h_check)) {
      return false;
    }
  }
  return traj.empty() || point_clear(field, traj.front().head<3>());
}

std::string fnv1a(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double finite_or_null(double v) { return std::isfinite(v) ? v : -1.0; }

class AssemblyRunner {
 public:
  AssemblyRunner(const ScenarioConfig& config, const RunOptions& options)
      : config_(config), options_(options), model_(config.model()) {
    nq_ = model_.nq();
    nj_ = model_.num_joints();
    lqr_cost_ = config.lqr.cost(nq_, model_.nu());
    mpc_ = config.resolved_mpc(model_);
    field_ = config.static_field();
    x_ = config.start_state(model_);
    const Vector grasp_pose = with_joints(model_, at_rest(x_, nq_), config.assembly.grasp_angle);
    tool_offset_ = tool_position(model_, with_position(grasp_pose, Vec3::Zero()));
  }

  AssemblyReport run() {
    const auto t0 = std::chrono::steady_clock::now();
    AssemblyReport report;
    report.scenario = config_.name;
    report.seed = config_.seed_or_throw();
    report.num_joints = nj_;
    report.h = config_.retime.h;
    report.parts_total = static_cast<int>(config_.parts.size());
    report.obstacle_counts.push_back(field_.size());

    for (int i = 0; i < report.parts_total; ++i) {
      bool ok = true;
      for (AssemblyPhase phase : kPhaseOrder) {
        PhaseReport pr = run_phase(i, phase, report.seed);
        ok = pr.success;
        log("part " + config_.parts[i].name + " " + to_string(phase) + (ok ? " ok" : " FAILED") +
            (pr.message.empty() ? "" : ": " + pr.message));
        report.phases.push_back(std::move(pr));
        if (!ok) break;
      }
      if (ok) ++report.parts_placed;
      report.obstacle_counts.push_back(field_.size());
      if (!ok) {
        report.success = false;
        carrying_ = -1;
        if (options_.strict) break;
      }
    }
    if (report.parts_placed != report.parts_total) report.success = false;

    report.min_clearance = std::numeric_limits<double>::infinity();
    double solve_sum = 0.0;
    for (const auto& p : report.phases) {
      report.min_clearance = std::min(report.min_clearance, p.min_clearance);
      report.audit_pass = report.audit_pass && p.audit_pass;
      if (p.phase == AssemblyPhase::kGrasp) {
        report.max_grasp_joint_error = std::max(report.max_grasp_joint_error, p.joint_error);
      }
      for (const auto& d : p.diagnostics) {
        solve_sum += d.solve_ms;
        report.max_solve_ms = std::max(report.max_solve_ms, d.solve_ms);
        ++report.mpc_steps;
      }
    }
    if (report.mpc_steps > 0) report.mean_solve_ms = solve_sum / report.mpc_steps;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.hash = report_hash(report);
    return report;
  }

 private:
  void log(const std::string& msg) const {
    if (options_.log) options_.log(msg);
  }

  PhaseReport run_phase(int part, AssemblyPhase phase, std::uint64_t seed) {
    PhaseReport pr;
    pr.part = part;
    pr.phase = phase;
    pr.obstacles = field_.size();
    const auto& A = config_.assembly;
    const Vector rest = at_rest(x_, nq_);
    const Vec3 tray = config_.printer_output;
    const Vec3 goal = config_.parts[part].goal;

    try {
      Vector target;
      bool plan_path = false;
      switch (phase) {
        case AssemblyPhase::kMoveToPrinter:
          target = with_position(rest, tray - tool_offset_);
          plan_path = true;
          break;
        case AssemblyPhase::kGrasp:
          target = with_joints(model_, rest, A.grasp_angle);
          break;
        case AssemblyPhase::kMoveToGoal:
          target = with_position(rest, goal - tool_offset_);
          plan_path = true;
          break;
        case AssemblyPhase::kPlace:
          target = rest;
          break;
        case AssemblyPhase::kRetract:
          target = with_joints(model_, rest, A.retract_angle);
          break;
      }

      if (phase == AssemblyPhase::kPlace) {
        const int steps = static_cast<int>(std::ceil(A.place_hold / config_.retime.h));
        pr.reference = hold(target, config_.retime.h);
        for (int k = 0; k < steps; ++k) {
          pr.reference.states.push_back(target);
          pr.reference.controls.push_back(Vector::Zero(model_.nu()));
        }
      } else {
        GeometricPath path;
        if (plan_path) {
          path = plan_and_smooth(rest, target, part, phase, seed, &pr);
        } else {
          path = GeometricPath({rest, target});
          pr.path_length = pr.smoothed_length = path.length();
        }
        pr.reference = retime(model_, path, lqr_cost_, config_.retime);
      }

      const RecedingHorizonResult rh =
          run_receding_horizon(model_, x_, pr.reference, field_, mpc_);
      pr.executed = rh.executed;
      pr.diagnostics = rh.diagnostics;
      x_ = rh.executed.back();
      summarize(target, &pr);

      std::string problem;
      const double reach = (x_.head<3>() - target.head<3>()).norm();
      if (!pr.audit_pass) problem = "executed path fails the collision audit";
      if (pr.joint_error > A.joint_tolerance) {
        problem = "joint error " + std::to_string(pr.joint_error) + " rad exceeds tolerance";
      }
      if (reach > A.attach_tolerance) {
        problem = "final base error " + std::to_string(reach) + " m exceeds tolerance";
      }
      if (phase == AssemblyPhase::kGrasp || phase == AssemblyPhase::kPlace) {
        const Vec3 want = phase == AssemblyPhase::kGrasp ? tray : goal;
        pr.tool_error = (tool_position(model_, x_) - want).norm();
        if (pr.tool_error > A.attach_tolerance) {
          problem = "tool misses the part by " + std::to_string(pr.tool_error) + " m";
        }
      }
      if (!problem.empty()) {
        pr.message = problem;
        return pr;
      }
      if (phase == AssemblyPhase::kGrasp) carrying_ = part;
      if (phase == AssemblyPhase::kPlace) {
        carrying_ = -1;
        field_.add(config_.part_obstacle(part));
      }
      pr.success = true;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      pr.message = e.what();
      pr.success = false;
    }
    return pr;
  }

  GeometricPath plan_and_smooth(const Vector& start, const Vector& target, int part,
                                AssemblyPhase phase, std::uint64_t seed, PhaseReport* pr) {
    const auto& S = config_.planner;
    const PlannerConfig pc = S.config(model_, start, phase_seed(seed, part, phase, 1));
    const ObstacleField planning = field_.inflated(S.inflation);

    const PlanResult plan_result = plan(model_, start, target, planning, pc);
    pr->planner_iterations = plan_result.iterations;
    pr->planner_nodes = plan_result.tree.size();
    pr->planner_cost = plan_result.cost;
    const GeometricPath raw = GeometricPath::from_trajectory(plan_result.trajectory);
    pr->path_length = raw.length();

    ShortcutConfig sc = config_.shortcut;
    sc.seed = phase_seed(seed, part, phase, 2);
    ShortcutResult smoothed = shortcut(raw, planning, sc);
    pr->smoothed_length = smoothed.path.length();
    pr->shortcuts = smoothed.accepted;
    return smoothed.path;
  }

  void summarize(const Vector& target, PhaseReport* pr) const {
    pr->duration = pr->executed.duration();
    pr->min_clearance = min_clearance(field_, pr->executed);
    pr->audit_pass = audit(field_, pr->executed);
    double sq = 0.0;
    for (int k = 0; k < pr->executed.knots(); ++k) {
      sq += (pr->executed.states[k].head<3>() - pr->reference.states[k].head<3>()).squaredNorm();
    }
    pr->tracking_rms = std::sqrt(sq / std::max(1, pr->executed.knots()));
    const int j0 = state::joints(nj_);
    pr->joint_error =
        nj_ > 0 ? (x_.segment(j0, nj_) - target.segment(j0, nj_)).cwiseAbs().maxCoeff() : 0.0;
    double sum = 0.0;
    for (const auto& d : pr->diagnostics) {
      pr->inner_iterations += d.inner;
      pr->max_violation = std::max(pr->max_violation, d.max_violation);
      pr->mpc_converged = pr->mpc_converged && d.converged;
      pr->max_solve_ms = std::max(pr->max_solve_ms, d.solve_ms);
      sum += d.solve_ms;
    }
    if (!pr->diagnostics.empty()) pr->mean_solve_ms = sum / pr->diagnostics.size();
  }

  const ScenarioConfig& config_;
  const RunOptions& options_;
  MultibodyModel model_;
  int nq_ = 0;
  int nj_ = 0;
  QuadraticCost lqr_cost_;
  MpcConfig mpc_;
  ObstacleField field_;
  Vector x_;
  Vec3 tool_offset_;
  int carrying_ = -1;
};

Json phase_json(const PhaseReport& p, bool include_timing) {
  Json j;
  j["part"] = p.part;
  j["phase"] = to_string(p.phase);
  j["success"] = p.success;
  j["message"] = p.message;
  j["obstacles"] = p.obstacles;
  j["planner_iterations"] = p.planner_iterations;
  j["planner_nodes"] = p.planner_nodes;
  j["planner_cost"] = p.planner_cost;
  j["path_length"] = p.path_length;
  j["smoothed_length"] = p.smoothed_length;
  j["shortcuts"] = p.shortcuts;
  j["knots"] = p.executed.knots();
  j["duration"] = p.duration;
  j["min_clearance"] = finite_or_null(p.min_clearance);
  j["audit_pass"] = p.audit_pass;
  j["tracking_rms"] = p.tracking_rms;
  j["joint_error"] = p.joint_error;
  j["tool_error"] = p.tool_error;
  j["max_violation"] = p.max_violation;
  j["inner_iterations"] = p.inner_iterations;
  j["mpc_converged"] = p.mpc_converged;
  if (include_timing) {
    j["mean_solve_ms"] = p.mean_solve_ms;
    j["max_solve_ms"] = p.max_solve_ms;
  }
  return j;
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(AssemblyPhase phase) {
  switch (phase) {
    case AssemblyPhase::kMoveToPrinter:
      return "MoveToPrinter";
    case AssemblyPhase::kGrasp:
      return "Grasp";
    case AssemblyPhase::kMoveToGoal:
      return "MoveToGoal";
    case AssemblyPhase::kPlace:
      return "Place";
    case AssemblyPhase::kRetract:
      return "Retract";
  }
  return "Unknown";
}

Trajectory AssemblyReport::executed() const {
  Trajectory t;
  t.h = h;
  for (const auto& p : phases) t.append(p.executed);
  return t;
}

AssemblyReport run_assembly(const ScenarioConfig& config, const RunOptions& options) {
  config.validate();
  AssemblyRunner runner(config, options);
  return runner.run();
}

std::string report_json(const AssemblyReport& r, bool include_timing) {
  Json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["parts_total"] = r.parts_total;
  j["parts_placed"] = r.parts_placed;
  j["obstacle_counts"] = r.obstacle_counts;
  j["min_clearance"] = finite_or_null(r.min_clearance);
  j["audit_pass"] = r.audit_pass;
  j["max_grasp_joint_error"] = r.max_grasp_joint_error;
  j["mpc_steps"] = r.mpc_steps;
  if (include_timing) {
    j["hash"] = r.hash;
    j["timing"] = {{"mean_solve_ms", r.mean_solve_ms},
                   {"max_solve_ms", r.max_solve_ms},
                   {"wall_seconds", r.wall_seconds}};
  }
  Json phases = Json::array();
  for (const auto& p : r.phases) phases.push_back(phase_json(p, include_timing));
  j["phases"] = phases;
  return j.dump(2) + "\n";
}

std::string report_hash(const AssemblyReport& r) {
  std::string data = report_json(r, false);
  const int nu = 6 + r.num_joints;
  for (const auto& p : r.phases) {
    data += trajectory_to_csv(p.reference, nu);
    data += trajectory_to_csv(p.executed, nu);
  }
  return fnv1a(data);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing: " + std::strerror(errno));
  out << text;
  out.flush();
  if (!out) throw Error("write to '" + path + "' failed: " + std::strerror(errno));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "': " + std::strerror(errno));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string series_csv(const Trajectory& traj, const std::vector<std::string>& names, int first,
                       int count) {
  std::string out = "t";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (int k = 0; k < traj.knots(); ++k) {
    out += csv_number(traj.time(k));
    for (int i = 0; i < count; ++i) out += "," + csv_number(traj.states[k][first + i]);
    out += "\n";
  }
  return out;
}

void export_series(const Trajectory& traj, int num_joints, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  const fs::path d(dir);
  write_text_file((d / "base_translation.csv").string(), series_csv(traj, {"x", "y", "z"}, 0, 3));
  write_text_file((d / "base_attitude.csv").string(),
                  series_csv(traj, {"roll", "pitch", "yaw"}, 3, 3));
  std::vector<std::string> joints;
  for (int i = 0; i < num_joints; ++i) joints.push_back("q" + std::to_string(i + 1));
  write_text_file((d / "manipulator.csv").string(),
                  series_csv(traj, joints, state::joints(num_joints), num_joints));
}

void export_run(const AssemblyReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "phases", ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  const fs::path d(dir);
  const int nu = 6 + report.num_joints;

  write_text_file((d / "report.json").string(), report_json(report, true));

  std::string diag = "part,phase,step,solve_ms,inner,outer,residual,max_violation,converged\n";
  for (const auto& p : report.phases) {
    for (const auto& s : p.diagnostics) {
      diag += std::to_string(p.part) + "," + to_string(p.phase) + "," + std::to_string(s.step) +
              "," + csv_number(s.solve_ms) + "," + std::to_string(s.inner) + "," +
              std::to_string(s.outer) + "," + csv_number(s.residual) + "," +
              csv_number(s.max_violation) + "," + (s.converged ? "1" : "0") + "\n";
    }
  }
  write_text_file((d / "diagnostics.csv").string(), diag);

  const Trajectory all = report.executed();
  write_text_file((d / "executed.csv").string(), trajectory_to_csv(all, nu));
  for (const auto& p : report.phases) {
    char name[64];
    std::snprintf(name, sizeof(name), "part%02d_%s", p.part + 1, to_string(p.phase).c_str());
    write_text_file((d / "phases" / (std::string(name) + ".csv")).string(),
                    trajectory_to_csv(p.executed, nu));
    write_text_file((d / "phases" / (std::string(name) + "_reference.csv")).string(),
                    trajectory_to_csv(p.reference, nu));
  }
  export_series(all, report.num_joints, dir);
}

}  // namespace freeflyer
