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

#ifndef FREEFLYER_NMPC_HPP_
#define FREEFLYER_NMPC_HPP_

#include <functional>
#include <vector>

#include "freeflyer/collision.hpp"
#include "freeflyer/panoc.hpp"
#include "freeflyer/robot.hpp"
#include "freeflyer/trajectory.hpp"

namespace freeflyer {

// Single-shooting problem over U = [u_0; ...; u_{N-1}] for a fixed initial
// state, reference window and obstacle field:
//
//   sum_j 1/2 |x_j - xr_j|_Q^2 + 1/2 |u_j - ur_j|_R^2 + 1/2 |x_N - xr_N|_QN^2
//     + penalty * sum_{i,j} max(0, 1 - (p_j - c_i)'P_i(p_j - c_i))^2
//
// with x_{j+1} = rk4(x_j, u_j) and p_j the base position of x_j, j = 1..N.
struct ParametricProblem {
  const MultibodyModel* model = nullptr;
  double h = 0.2;
  Vector x0;
  std::vector<Vector> x_ref;  // N + 1 states
  std::vector<Vector> u_ref;  // N controls
  Matrix Q, R, QN;
  ObstacleField obstacles;
  int k0 = 0;  // time index of x0 for moving obstacles
  double penalty = 0.0;
  BoxSet set;  // empty means unbounded
  // Equality constraints F1(U) in {0}; unused by the penalty route and empty
  // by default.
  std::function<Vector(const Vector&)> equality;

  int horizon() const { return static_cast<int>(u_ref.size()); }
  int nu() const;
  int dimension() const { return horizon() * nu(); }
  BoxSet box() const;
  void validate() const;
};

// Cost at U; when `grad` is non-null the adjoint gradient is written to it.
// Throws DivergedRollout when the rollout leaves the finite range.
double rollout_cost_and_gradient(const ParametricProblem& problem, const Vector& U,
                                 Vector* grad);

// States x_0..x_N of the single-shooting rollout.
std::vector<Vector> rollout_states(const ParametricProblem& problem, const Vector& U);

// Gauss-Newton approximation of the cost Hessian at U, including the active
// obstacle penalty terms.
Matrix gauss_newton_hessian(const ParametricProblem& problem, const Vector& U);

// Largest max(0, 1 - quadratic form) over obstacles and knots 1..N.
double max_violation(const ParametricProblem& problem, const std::vector<Vector>& states);

struct MpcConfig {
  int horizon = 10;                // N_p
  double tolerance = 1e-3;         // fixed-point residual
  int max_inner_iterations = 100;
  int memory = 10;
  int max_line_search = 20;
  double penalty_initial = 100.0;
  double penalty_growth = 10.0;
  int max_outer_iterations = 6;
  double constraint_tolerance = 1e-3;
  double obstacle_inflation = 1.05;  // safety-factor multiplier inside the controller
  // Solve in variables z = T U where T'T is the Gauss-Newton Hessian at the
  // warm start (diagonal part only when control bounds are set).
  bool precondition = true;
  Vector u_lower;                    // empty = unbounded
  Vector u_upper;
  Matrix Q, R, QN;

  static MpcConfig defaults(const MultibodyModel& model);
  void validate(int nx, int nu) const;
};

struct MpcDiagnostics {
  int step = 0;
  double solve_ms = 0.0;
  int inner = 0;
  int outer = 0;
  double residual = 0.0;
  double max_violation = 0.0;
  double cost = 0.0;
  bool converged = false;
  bool feasible = true;
  std::vector<double> outer_violation;  // after each outer iteration
  bool envelope_monotone = true;
};

struct MpcStepResult {
  Vector u;  // first control
  Vector U;  // full solution, warm start for the next step
  MpcDiagnostics diagnostics;
};

// Reference states k..k+N and controls k..k+N-1, holding the final state
// (with zero control) past the end.
struct ReferenceWindow {
  std::vector<Vector> states;
  std::vector<Vector> controls;
};
ReferenceWindow reference_window(const Trajectory& reference, int k, int horizon, int nu);

// One receding-horizon solve from x_now. U_prev (possibly empty) is shifted
// one step to warm start the solver.
MpcStepResult mpc_step(const MultibodyModel& model, const Vector& x_now,
                       const ReferenceWindow& window, double h, const ObstacleField& obstacles,
                       int k0, const MpcConfig& config, const Vector& U_prev);

struct RecedingHorizonResult {
  Trajectory executed;
  std::vector<MpcDiagnostics> diagnostics;

  double mean_solve_ms() const;
  double max_violation() const;
  bool all_converged() const;
};

// Closed loop over every step of `reference` with the nonlinear plant.
// Obstacle time indices start at k0.
RecedingHorizonResult run_receding_horizon(const MultibodyModel& model, const Vector& x0,
                                           const Trajectory& reference,
                                           const ObstacleField& obstacles,
                                           const MpcConfig& config, int k0 = 0);

}  // namespace freeflyer

#endif  // FREEFLYER_NMPC_HPP_
