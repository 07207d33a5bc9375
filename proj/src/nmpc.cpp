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

#include "freeflyer/nmpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"

namespace freeflyer {

namespace {

void check_finite(const Vector& x, int j) {
  if (!x.allFinite()) {
    throw DivergedRollout("rollout state " + std::to_string(j) + " is not finite");
  }
}

// Penalty value at base position p and its gradient with respect to p.
double obstacle_penalty(const ObstacleField& field, const Vec3& p, int k, double mu,
                        Vec3* grad) {
  double value = 0.0;
  if (grad) grad->setZero();
  for (const auto& obs : field.obstacles) {
    const Vec3 d = p - obs.center(k);
    const Vec3 Pd = obs.effective_shape() * d;
    const double viol = 1.0 - d.dot(Pd);
    if (viol <= 0.0) continue;
    value += mu * viol * viol;
    if (grad) *grad -= 4.0 * mu * viol * Pd;
  }
  return value;
}

}  // namespace

int ParametricProblem::nu() const { return model ? model->nu() : 0; }

BoxSet ParametricProblem::box() const {
  if (set.size() == dimension()) return set;
  return BoxSet::unbounded(dimension());
}

void ParametricProblem::validate() const {
  if (!model) throw ContractViolation("ParametricProblem: no model");
  const int nx = model->nx();
  const int n = horizon();
  if (n < 1) throw ContractViolation("ParametricProblem: horizon must be at least 1");
  if (x0.size() != nx) throw ContractViolation("ParametricProblem: x0 has wrong dimension");
  if (static_cast<int>(x_ref.size()) != n + 1) {
    throw ContractViolation("ParametricProblem: x_ref needs horizon + 1 states");
  }
  if (Q.rows() != nx || Q.cols() != nx || QN.rows() != nx || QN.cols() != nx ||
      R.rows() != nu() || R.cols() != nu()) {
    throw ContractViolation("ParametricProblem: weight matrices have wrong shape");
  }
  if (!(h > 0.0) || penalty < 0.0) {
    throw ContractViolation("ParametricProblem: h must be positive, penalty non-negative");
  }
  if (set.size() != 0 && set.size() != dimension()) {
    throw ContractViolation("ParametricProblem: box has wrong dimension");
  }
}

namespace {

std::vector<Vector> rollout_states_impl(const ParametricProblem& problem, const Vector& U) {
  const int n = problem.horizon();
  const int nu = problem.nu();
  if (U.size() != n * nu) throw ContractViolation("rollout: U has wrong dimension");
  std::vector<Vector> xs;
  xs.reserve(n + 1);
  xs.push_back(problem.x0);
  for (int j = 0; j < n; ++j) {
    xs.push_back(rk4_step(*problem.model, xs.back(), U.segment(j * nu, nu), problem.h));
    check_finite(xs.back(), j + 1);
  }
  return xs;
}

}  // namespace

double max_violation(const ParametricProblem& problem, const std::vector<Vector>& states) {
  double worst = 0.0;
  for (std::size_t j = 1; j < states.size(); ++j) {
    const Vec3 p = states[j].head<3>();
    for (const auto& obs : problem.obstacles.obstacles) {
      worst = std::max(worst, 1.0 - obs.quadratic_form(p, problem.k0 + static_cast<int>(j)));
    }
  }
  return worst;
}

namespace {

double cost_and_gradient_impl(const ParametricProblem& problem, const Vector& U,
                              Vector* grad) {
  const int n = problem.horizon();
  const int nu = problem.nu();
  if (U.size() != n * nu) throw ContractViolation("rollout: U has wrong dimension");
  const MultibodyModel& model = *problem.model;
  const double mu = problem.penalty;
  const bool penalize = mu > 0.0 && !problem.obstacles.empty();

  double cost = 0.0;
  if (!grad) {
    Vector x = problem.x0;
    for (int j = 0; j < n; ++j) {
      const Vector e = x - problem.x_ref[j];
      const Vector du = U.segment(j * nu, nu) - problem.u_ref[j];
      cost += 0.5 * e.dot(problem.Q * e) + 0.5 * du.dot(problem.R * du);
      x = rk4_step(model, x, U.segment(j * nu, nu), problem.h);
      check_finite(x, j + 1);
      if (penalize) {
        cost += obstacle_penalty(problem.obstacles, x.head<3>(), problem.k0 + j + 1, mu, nullptr);
      }
    }
    const Vector e = x - problem.x_ref[n];
    cost += 0.5 * e.dot(problem.QN * e);
    return cost;
  }

  std::vector<Rk4Linearization> lin;
  lin.reserve(n);
  std::vector<Vector> xs{problem.x0};
  for (int j = 0; j < n; ++j) {
    lin.emplace_back(model, xs.back(), U.segment(j * nu, nu), problem.h);
    xs.push_back(lin.back().next_state());
    check_finite(xs.back(), j + 1);
  }

  grad->resize(n * nu);
  // Adjoint of x_j carried backwards.
  Vector e = xs[n] - problem.x_ref[n];
  Vector QNe = problem.QN * e;
  cost += 0.5 * e.dot(QNe);
  Vector lambda = QNe;
  Vec3 gp;
  if (penalize) {
    cost += obstacle_penalty(problem.obstacles, xs[n].head<3>(), problem.k0 + n, mu, &gp);
    lambda.head<3>() += gp;
  }
  for (int j = n - 1; j >= 0; --j) {
    const Vector du = U.segment(j * nu, nu) - problem.u_ref[j];
    const Vector Rdu = problem.R * du;
    e = xs[j] - problem.x_ref[j];
    const Vector Qe = problem.Q * e;
    cost += 0.5 * e.dot(Qe) + 0.5 * du.dot(Rdu);
    auto [lx, lu] = lin[j].vjp(lambda);
    grad->segment(j * nu, nu) = Rdu + lu;
    lambda = Qe + lx;
    if (penalize && j > 0) {
      cost += obstacle_penalty(problem.obstacles, xs[j].head<3>(), problem.k0 + j, mu, &gp);
      lambda.head<3>() += gp;
    }
  }
  return cost;
}

}  // namespace

std::vector<Vector> rollout_states(const ParametricProblem& problem, const Vector& U) {
  try {
    return rollout_states_impl(problem, U);
  } catch (const DivergedRollout&) {
    throw;
  } catch (const NumericalOverflow& e) {
    throw DivergedRollout(e.what());
  }
}

double rollout_cost_and_gradient(const ParametricProblem& problem, const Vector& U,
                                 Vector* grad) {
  try {
    return cost_and_gradient_impl(problem, U, grad);
  } catch (const DivergedRollout&) {
    throw;
  } catch (const NumericalOverflow& e) {
    throw DivergedRollout(e.what());
  }
}

Matrix gauss_newton_hessian(const ParametricProblem& problem, const Vector& U) {
  const int n = problem.horizon();
  const int nu = problem.nu();
  const int nx = problem.model->nx();
  if (U.size() != n * nu) throw ContractViolation("gauss_newton_hessian: U has wrong dimension");
  std::vector<Matrix> A, B;
  std::vector<Vector> xs{problem.x0};
  for (int j = 0; j < n; ++j) {
    Rk4Linearization lin(*problem.model, xs.back(), U.segment(j * nu, nu), problem.h);
    A.push_back(lin.state_jacobian());
    B.push_back(lin.control_jacobian());
    xs.push_back(lin.next_state());
    check_finite(xs.back(), j + 1);
  }

  Matrix H = Matrix::Zero(n * nu, n * nu);
  for (int j = 0; j < n; ++j) H.block(j * nu, j * nu, nu, nu) = problem.R;
  // S holds d x_m / d u_j for j < m, one block column per control.
  Matrix S = Matrix::Zero(nx, n * nu);
  for (int m = 1; m <= n; ++m) {
    if (m > 1) S.leftCols((m - 1) * nu) = A[m - 1] * S.leftCols((m - 1) * nu);
    S.block(0, (m - 1) * nu, nx, nu) = B[m - 1];
    Matrix W = m == n ? problem.QN : problem.Q;
    if (problem.penalty > 0.0) {
      for (const auto& obs : problem.obstacles.obstacles) {
        const Vec3 d = xs[m].head<3>() - obs.center(problem.k0 + m);
        const Vec3 Pd = obs.effective_shape() * d;
        if (1.0 - d.dot(Pd) > 0.0) {
          W.topLeftCorner<3, 3>() += 8.0 * problem.penalty * Pd * Pd.transpose();
        }
      }
    }
    const auto Sm = S.leftCols(m * nu);
    H.topLeftCorner(m * nu, m * nu) += Sm.transpose() * W * Sm;
  }
  return 0.5 * (H + H.transpose());
}

MpcConfig MpcConfig::defaults(const MultibodyModel& model) {
  MpcConfig c;
  const int nq = model.nq();
  Vector q(2 * nq);
  q.head(nq).setConstant(100.0);
  q.tail(nq).setConstant(10.0);
  c.Q = q.asDiagonal();
  c.QN = c.Q;
  c.R = Matrix::Identity(model.nu(), model.nu()) * 0.01;
  return c;
}

void MpcConfig::validate(int nx, int nu) const {
  if (horizon < 1) throw ConfigError("mpc: horizon must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("mpc: tolerance must be positive");
  if (max_inner_iterations < 1 || max_outer_iterations < 1) {
    throw ConfigError("mpc: iteration budgets must be at least 1");
  }
  if (memory < 0 || max_line_search < 0) throw ConfigError("mpc: memory and line search >= 0");
  if (!(penalty_initial > 0.0)) throw ConfigError("mpc: penalty_initial must be positive");
  if (!(penalty_growth > 1.0)) throw ConfigError("mpc: penalty_growth must exceed 1");
  if (!(constraint_tolerance >= 0.0)) throw ConfigError("mpc: constraint_tolerance >= 0");
  if (!(obstacle_inflation >= 1.0)) throw ConfigError("mpc: obstacle_inflation must be >= 1");
  if (Q.rows() != nx || Q.cols() != nx || QN.rows() != nx || QN.cols() != nx) {
    throw ConfigError("mpc: Q and QN must be " + std::to_string(nx) + "x" + std::to_string(nx));
  }
  if (R.rows() != nu || R.cols() != nu) {
    throw ConfigError("mpc: R must be " + std::to_string(nu) + "x" + std::to_string(nu));
  }
  if (u_lower.size() != u_upper.size() || (u_lower.size() != 0 && u_lower.size() != nu)) {
    throw ConfigError("mpc: control bounds must both be empty or have " + std::to_string(nu) +
                      " entries");
  }
  for (int i = 0; i < u_lower.size(); ++i) {
    if (!(u_lower[i] <= u_upper[i])) throw ConfigError("mpc: control bound lower > upper");
  }
}

ReferenceWindow reference_window(const Trajectory& reference, int k, int horizon, int nu) {
  if (reference.empty()) throw ContractViolation("reference_window: empty reference");
  ReferenceWindow w;
  const int last = reference.knots() - 1;
  for (int j = 0; j <= horizon; ++j) {
    w.states.push_back(reference.states[std::min(k + j, last)]);
  }
  for (int j = 0; j < horizon; ++j) {
    w.controls.push_back(reference.control_or_zero(k + j, nu));
  }
  return w;
}

MpcStepResult mpc_step(const MultibodyModel& model, const Vector& x_now,
                       const ReferenceWindow& window, double h, const ObstacleField& obstacles,
                       int k0, const MpcConfig& config, const Vector& U_prev) {
  const int nu = model.nu();
  const int n = config.horizon;
  config.validate(model.nx(), nu);
  if (static_cast<int>(window.states.size()) < n + 1 ||
      static_cast<int>(window.controls.size()) < n) {
    throw ContractViolation("mpc_step: reference window shorter than the horizon");
  }

  ParametricProblem problem;
  problem.model = &model;
  problem.h = h;
  problem.x0 = x_now;
  problem.x_ref.assign(window.states.begin(), window.states.begin() + n + 1);
  problem.u_ref.assign(window.controls.begin(), window.controls.begin() + n);
  problem.Q = config.Q;
  problem.R = config.R;
  problem.QN = config.QN;
  problem.obstacles = obstacles.inflated(config.obstacle_inflation);
  problem.k0 = k0;
  if (config.u_lower.size() == nu) {
    problem.set.lower = config.u_lower.replicate(n, 1);
    problem.set.upper = config.u_upper.replicate(n, 1);
  }
  problem.validate();
  const BoxSet box = problem.box();

  Vector U(n * nu);
  if (U_prev.size() == n * nu) {
    U.head((n - 1) * nu) = U_prev.tail((n - 1) * nu);
    U.tail(nu) = U_prev.tail(nu);
  } else {
    for (int j = 0; j < n; ++j) U.segment(j * nu, nu) = problem.u_ref[j];
  }
  U = box.project(U);

  PanocConfig pc;
  pc.tolerance = config.tolerance;
  pc.max_iterations = config.max_inner_iterations;
  pc.memory = config.memory;
  pc.max_line_search = config.max_line_search;

  CostFunction f = [&problem](const Vector& u, Vector* g) {
    try {
      return rollout_cost_and_gradient(problem, u, g);
    } catch (const NumericalOverflow&) {
    } catch (const SingularityError&) {
    }
    if (g) g->setConstant(u.size(), std::numeric_limits<double>::quiet_NaN());
    return std::numeric_limits<double>::infinity();
  };

  const bool bounded = config.u_lower.size() == nu;
  const auto t0 = std::chrono::steady_clock::now();
  MpcDiagnostics diag;
  problem.penalty = problem.obstacles.empty() ? 0.0 : config.penalty_initial;
  for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
    // z = T U with T upper triangular (or diagonal), T'T ~ Hessian.
    Matrix T = Matrix::Identity(n * nu, n * nu);
    if (config.precondition) {
      Matrix H = gauss_newton_hessian(problem, U);
      H.diagonal().array() += 1e-9 * H.diagonal().mean();
      if (bounded) {
        T = H.diagonal().cwiseSqrt().asDiagonal();
      } else {
        Eigen::LLT<Matrix> llt(H);
        if (llt.info() == Eigen::Success) T = llt.matrixU();
      }
    }
    CostFunction fz = [&](const Vector& z, Vector* g) {
      const double c = f(T.triangularView<Eigen::Upper>().solve(z), g);
      if (g) *g = T.transpose().triangularView<Eigen::Lower>().solve(*g);
      return c;
    };
    BoxSet zbox = box;
    if (bounded) {
      zbox.lower = T.diagonal().cwiseProduct(box.lower);
      zbox.upper = T.diagonal().cwiseProduct(box.upper);
    }
    const SolverState st = panoc_solve(fz, zbox, T * U, pc);
    U = T.triangularView<Eigen::Upper>().solve(st.u);
    diag.inner += st.iterations;
    diag.outer = outer + 1;
    diag.residual = st.residual;
    diag.cost = st.cost;
    diag.converged = st.status == SolverStatus::kConverged;
    diag.envelope_monotone = diag.envelope_monotone && st.envelope_monotone();
    diag.max_violation = max_violation(problem, rollout_states(problem, U));
    diag.outer_violation.push_back(diag.max_violation);
    if (diag.max_violation <= config.constraint_tolerance) break;
    problem.penalty *= config.penalty_growth;
  }
  diag.feasible = diag.max_violation <= config.constraint_tolerance;
  diag.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  MpcStepResult out;
  out.u = U.head(nu);
  out.U = std::move(U);
  out.diagnostics = std::move(diag);
  return out;
}

double RecedingHorizonResult::mean_solve_ms() const {
  if (diagnostics.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : diagnostics) s += d.solve_ms;
  return s / static_cast<double>(diagnostics.size());
}

double RecedingHorizonResult::max_violation() const {
  double worst = 0.0;
  for (const auto& d : diagnostics) worst = std::max(worst, d.max_violation);
  return worst;
}

bool RecedingHorizonResult::all_converged() const {
  return std::all_of(diagnostics.begin(), diagnostics.end(),
                     [](const MpcDiagnostics& d) { return d.converged; });
}

RecedingHorizonResult run_receding_horizon(const MultibodyModel& model, const Vector& x0,
                                           const Trajectory& reference,
                                           const ObstacleField& obstacles,
                                           const MpcConfig& config, int k0) {
  reference.check(model.nx(), model.nu());
  if (x0.size() != model.nx()) throw ContractViolation("run_receding_horizon: bad x0");

  RecedingHorizonResult out;
  out.executed.h = reference.h;
  out.executed.states.push_back(x0);
  Vector U;
  Vector x = x0;
  for (int k = 0; k < reference.steps(); ++k) {
    const ReferenceWindow w = reference_window(reference, k, config.horizon, model.nu());
    MpcStepResult step = mpc_step(model, x, w, reference.h, obstacles, k0 + k, config, U);
    step.diagnostics.step = k;
    x = rk4_step(model, x, step.u, reference.h);
    if (!x.allFinite()) throw DivergedRollout("closed loop diverged at step " + std::to_string(k));
    out.executed.controls.push_back(step.u);
    out.executed.states.push_back(x);
    out.diagnostics.push_back(std::move(step.diagnostics));
    U = std::move(step.U);
  }
  return out;
}

}  // namespace freeflyer
