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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"
#include "freeflyer/harness.hpp"
#include "freeflyer/ltv.hpp"
#include "freeflyer/lqr.hpp"
#include "freeflyer/nmpc.hpp"
#include "freeflyer/panoc.hpp"
#include "freeflyer/planner.hpp"
#include "freeflyer/smoother.hpp"
#include "oracles.hpp"

namespace freeflyer {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome riccati_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int nx = 1 + trial % 6, nu = 1 + trial % 3, n = 1 + trial % 8;
    const oracle::LtiProblem p = oracle::random_lti(nx, nu, n, rng, trial % 2 == 1);
    const Vector dx0 = oracle::random_vector(nx, rng);
    const double dense = oracle::dense_lqr_optimum(p.ltv, p.cost, dx0);
    const ValueFunctionSequence v = riccati_backward_pass(p.ltv, p.cost);
    const double policy = rollout_linear(p.ltv, v, p.cost, dx0).cost;
    worst = std::max(worst, std::abs(policy - dense) / std::max(1.0, std::abs(dense)));
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-8 && elapsed < 5.0,
          format("worst relative gap %.2e over 100 systems in %.2f s", worst, elapsed)};
}

Outcome discretization_bound() {
  std::mt19937_64 rng(102);
  int violations = 0;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    const Matrix A = oracle::random_stable(n, rng);
    const double h = oracle::uniform(rng, 0.01, 0.2);
    const DiscreteLinearization d = discretize(A, Matrix::Identity(n, n), h);
    const double err = (d.A - oracle::expm(h * A)).norm();
    const double bound = 2.0 * std::pow((h * A).norm(), 5) / 120.0;
    violations += err > bound;
    worst_ratio = std::max(worst_ratio, err / bound);
  }
  return {violations == 0,
          format("%d/100 over the bound, worst error/bound %.3f", violations, worst_ratio)};
}

Outcome dynamics_conservation() {
  const MultibodyModel model = oracle::astrobee_model();
  const int nq = model.nq();
  Vector x = Vector::Zero(model.nx());
  x.segment<3>(nq) << 0.2, -0.1, 0.05;
  x.segment<3>(nq + 3) << 0.3, -0.2, 0.4;
  x[nq + 6] = 0.5;
  x[nq + 7] = -0.3;
  const double T0 = oracle::kinetic_energy(model, x);
  const auto p0 = oracle::spatial_momentum(model, x);
  const Vector u = Vector::Zero(model.nu());
  double energy = 0.0, momentum = 0.0;
  for (int k = 1; k <= 10000; ++k) {
    x = rk4_step(model, x, u, 1e-3);
    if (k % 500 == 0) {
      const double drift = std::abs(oracle::kinetic_energy(model, x) - T0) / T0;
      energy = std::max(energy, drift / (k * 1e-3));
      const auto p = oracle::spatial_momentum(model, x);
      momentum = std::max(momentum, (p.tail<3>() - p0.tail<3>()).norm() / p0.tail<3>().norm());
    }
  }

  Vector x0 = Vector::Zero(model.nx());
  x0.segment<3>(nq + 3) << 1.0, -0.7, 0.9;
  x0[nq + 6] = 1.5;
  x0[nq + 7] = -1.2;
  auto run = [&](int steps) {
    Vector y = x0;
    for (int k = 0; k < steps; ++k) y = rk4_step(model, y, u, 1.0 / steps);
    return y;
  };
  const Vector ref = run(1280);
  const double order = std::log2((run(20) - ref).norm() / (run(40) - ref).norm());
  return {energy < 1e-6 && momentum < 1e-9 && order >= 3.9,
          format("energy drift %.2e /s, momentum drift %.2e, RK4 order %.2f", energy, momentum,
                 order)};
}

Outcome nmpc_gradient() {
  const MultibodyModel model = oracle::astrobee_model();
  std::mt19937_64 rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 10;
    ParametricProblem p;
    p.model = &model;
    p.h = 0.2;
    p.x0 = oracle::random_state(model, rng, 0.05);
    for (int j = 0; j <= n; ++j) p.x_ref.push_back(oracle::random_state(model, rng, 0.05));
    for (int j = 0; j < n; ++j) p.u_ref.push_back(oracle::random_vector(model.nu(), rng, 0.05));
    p.Q = oracle::random_spd(model.nx(), rng, 0.5, 5.0);
    p.QN = oracle::random_spd(model.nx(), rng, 0.5, 5.0);
    p.R = oracle::random_spd(model.nu(), rng, 0.01, 0.1);
    if (trial % 2 == 1) {
      p.obstacles.add(EllipsoidObstacle::with_semi_axes(
          p.x0.head<3>() + oracle::random_vector(3, rng, 0.02), Vec3::Constant(0.3)));
      p.penalty = 50.0;
    }
    const Vector U = oracle::random_vector(p.dimension(), rng, 0.05);
    Vector g;
    rollout_cost_and_gradient(p, U, &g);
    Vector fd(U.size());
    for (int i = 0; i < U.size(); ++i) {
      Vector up = U, um = U;
      up[i] += 1e-6;
      um[i] -= 1e-6;
      fd[i] = (rollout_cost_and_gradient(p, up, nullptr) -
               rollout_cost_and_gradient(p, um, nullptr)) / 2e-6;
    }
    worst = std::max(worst, (g - fd).norm() / std::max(1.0, fd.norm()));
  }
  return {worst < 1e-5, format("worst relative error %.2e over 100 problems", worst)};
}

Outcome panoc_suite() {
  std::vector<std::string> failures;
  int runs = 0;
  auto check = [&](const std::string& name, const CostFunction& f, const BoxSet& set,
                   const Vector& u0, const PanocConfig& config) {
    const SolverState s = panoc_solve(f, set, u0, config);
    ++runs;
    Vector g;
    f(s.u, &g);
    const double residual = (s.u - set.project(s.u - s.gamma * g)).norm() / s.gamma;
    if (s.status != SolverStatus::kConverged || residual > config.tolerance ||
        !s.envelope_monotone()) {
      failures.push_back(name);
    }
  };
  std::mt19937_64 rng(105);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector center = oracle::random_vector(10, rng, 3.0);
    const CostFunction f = [center](const Vector& u, Vector* grad) {
      if (grad != nullptr) *grad = u - center;
      return 0.5 * (u - center).squaredNorm();
    };
    check("quadratic", f, BoxSet::unbounded(10), Vector::Zero(10), PanocConfig{});
    check("box-quadratic", f, BoxSet::uniform(10, -1.0, 1.5), Vector::Zero(10), PanocConfig{});
  }
  const CostFunction rosenbrock = [](const Vector& u, Vector* grad) {
    const double a = 1.0 - u[0], b = u[1] - u[0] * u[0];
    if (grad != nullptr) {
      grad->resize(2);
      (*grad)[0] = -2.0 * a - 400.0 * u[0] * b;
      (*grad)[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  PanocConfig tight;
  tight.tolerance = 1e-10;
  tight.max_iterations = 2000;
  for (const Eigen::Vector2d& start : {Eigen::Vector2d(-1.2, 1.0), Eigen::Vector2d(2.0, -1.0),
                                      Eigen::Vector2d(0.0, 0.0)}) {
    check("rosenbrock", rosenbrock, BoxSet::unbounded(2), start, tight);
    check("rosenbrock-box", rosenbrock, BoxSet::uniform(2, -2.0, 0.5), start, PanocConfig{});
  }
  std::string detail = format("%d/%d runs converged with monotone envelope",
                              runs - static_cast<int>(failures.size()), runs);
  for (const auto& f : failures) detail += "; failed " + f;
  return {failures.empty(), detail};
}

Outcome planner_corridor() {
  const ScenarioConfig c =
      load_scenario(std::string(FREEFLYER_SOURCE_DIR) + "/scenarios/corridor.yaml");
  const MultibodyModel model = c.model();
  Vector start = c.start_state(model), goal = start;
  goal.head<3>() = *c.goal_position;
  const ObstacleField field = c.static_field().inflated(c.planner.inflation);
  int found = 0, clear = 0;
  double sum_long = 0.0, sum_short = 0.0;
  int short_found = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PlannerConfig pc = c.planner.config(model, start, seed);
    pc.max_iterations = 4000;
    try {
      const PlanResult r = plan(model, start, goal, field, pc);
      ++found;
      sum_long += r.cost;
      clear += trajectory_clear(r.trajectory, field, field.default_check_resolution());
    } catch (const NoPathError&) {
    }
    pc.max_iterations = 500;
    try {
      sum_short += plan(model, start, goal, field, pc).cost;
      ++short_found;
    } catch (const NoPathError&) {
    }
  }
  const double mean_long = found ? sum_long / found : INFINITY;
  const double mean_short = short_found ? sum_short / short_found : INFINITY;
  return {found == 10 && clear == 10 && mean_long <= mean_short,
          format("%d/10 found, %d/10 clear, mean cost %.3f at 4000 vs %.3f at 500 (%d/10 found)",
                 found, clear, mean_long, mean_short, short_found)};
}

Outcome smoother_detour() {
  auto at = [](double x, double y) {
    Vector s = Vector::Zero(16);
    s.head<2>() << x, y;
    return s;
  };
  const GeometricPath detour({at(0, 0), at(0, 2), at(2, 2)});
  ShortcutConfig sc;
  sc.iterations = 200;
  const ShortcutResult r = shortcut(detour, ObstacleField{}, sc);
  const double straight = std::sqrt(8.0);
  bool monotone = true;
  for (std::size_t i = 1; i < r.length_history.size(); ++i) {
    monotone = monotone && r.length_history[i] <= r.length_history[i - 1];
  }
  const double excess = r.path.length() / straight - 1.0;
  return {excess <= 0.01 && monotone,
          format("length %.5f vs straight %.5f (+%.3f%%), %d accepted, monotone %s",
                 r.path.length(), straight, 100 * excess, r.accepted, monotone ? "yes" : "no")};
}

Outcome lqr_step_settling() {
  const MultibodyModel model = oracle::astrobee_model();
  Vector target = Vector::Zero(model.nx());
  target[0] = 1.0;
  const Trajectory ref = oracle::constant_reference(target, model.nu(), 60, 0.2);
  const Trajectory out =
      track(model, ref, DiagonalWeights{}.cost(model.nq(), model.nu()), Vector::Zero(model.nx()));
  int last_out = -1;
  double overshoot = 0.0;
  for (int k = 0; k < out.knots(); ++k) {
    if ((out.states[k].head<3>() - target.head<3>()).norm() > 0.02) last_out = k;
    overshoot = std::max(overshoot, out.states[k][0] - 1.0);
  }
  const double ts = (last_out + 1) * out.h;
  return {ts < 5.0, format("2%% settling time %.2f s, overshoot %.1f%%", ts, 100 * overshoot)};
}

struct PyramidRuns {
  std::optional<AssemblyReport> first, second;
  std::string error;
};

PyramidRuns& pyramid_runs() {
  static PyramidRuns runs = [] {
    PyramidRuns r;
    try {
      const ScenarioConfig c =
          load_scenario(std::string(FREEFLYER_SOURCE_DIR) + "/scenarios/pyramid10.yaml");
      r.first = run_assembly(c);
      r.second = run_assembly(c);
    } catch (const Error& e) {
      r.error = e.what();
    }
    return r;
  }();
  return runs;
}

Outcome pyramid_solve_time() {
  const PyramidRuns& runs = pyramid_runs();
  if (!runs.first) return {false, "pyramid10 did not run: " + runs.error};
  const AssemblyReport& r = *runs.first;
  const ScenarioConfig c =
      load_scenario(std::string(FREEFLYER_SOURCE_DIR) + "/scenarios/pyramid10.yaml");
  return {c.mpc.horizon == 10 && r.mpc_steps > 0 && r.mean_solve_ms < 100.0,
          format("horizon %d, %d MPC steps, mean solve %.2f ms, max %.2f ms", c.mpc.horizon,
                 r.mpc_steps, r.mean_solve_ms, r.max_solve_ms)};
}

Outcome pyramid_end_to_end() {
  const PyramidRuns& runs = pyramid_runs();
  if (!runs.first) return {false, "pyramid10 did not run: " + runs.error};
  const AssemblyReport& r = *runs.first;
  const double quarter = std::numbers::pi / 4;
  double worst_grasp = 0.0;
  int grasps = 0;
  for (const auto& p : r.phases) {
    if (p.phase != AssemblyPhase::kGrasp) continue;
    ++grasps;
    for (int j = 0; j < r.num_joints; ++j) {
      worst_grasp = std::max(worst_grasp, std::abs(p.executed.back()[6 + j] - quarter));
    }
  }
  bool counts_monotone = true;
  for (std::size_t i = 1; i < r.obstacle_counts.size(); ++i) {
    counts_monotone = counts_monotone && r.obstacle_counts[i] >= r.obstacle_counts[i - 1];
  }
  const bool pass = r.parts_placed == 10 && r.success && r.audit_pass && r.min_clearance >= 1.0 &&
                    grasps == 10 && worst_grasp <= 1e-2 && counts_monotone &&
                    r.wall_seconds < 600.0;
  return {pass, format("%d/10 placed, audit %s, min clearance %.3f, worst grasp error %.2e rad, "
                       "obstacles %d->%d, %.1f s",
                       r.parts_placed, r.audit_pass ? "pass" : "fail", r.min_clearance,
                       worst_grasp, r.obstacle_counts.front(), r.obstacle_counts.back(),
                       r.wall_seconds)};
}

Outcome pyramid_determinism() {
  const PyramidRuns& runs = pyramid_runs();
  if (!runs.first || !runs.second) return {false, "pyramid10 did not run: " + runs.error};
  const bool same = runs.first->hash == runs.second->hash;
  return {same, "hashes " + runs.first->hash + " and " + runs.second->hash};
}

int run_all() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"riccati_oracle", riccati_oracle},
      {"discretization_bound", discretization_bound},
      {"dynamics_conservation", dynamics_conservation},
      {"nmpc_gradient", nmpc_gradient},
      {"panoc_suite", panoc_suite},
      {"planner_corridor", planner_corridor},
      {"smoother_detour", smoother_detour},
      {"lqr_step_settling", lqr_step_settling},
      {"pyramid_solve_time", pyramid_solve_time},
      {"pyramid_end_to_end", pyramid_end_to_end},
      {"pyramid_determinism", pyramid_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace freeflyer

int main() { return freeflyer::run_all(); }
