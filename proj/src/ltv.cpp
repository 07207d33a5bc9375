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

#include "freeflyer/ltv.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"

namespace freeflyer {

namespace {

double fd_step(double c) { return std::max(1e-6, 1e-6 * std::abs(c)); }

struct KnotResult {
  Matrix A, B;
  Vector g;
};

KnotResult linearize_knot(const MultibodyModel& model, const Trajectory& traj, int k,
                          JacobianMethod method) {
  const int nu = model.nu();
  const Vector& x = traj.states[k];
  const Vector u = traj.control_or_zero(k, nu);
  const ContinuousLinearization c = method == JacobianMethod::kForwardMode
                                        ? linearize_exact(model, x, u)
                                        : linearize(model, x, u);
  const DiscreteLinearization d = discretize(c.A, c.B, traj.h);
  const Vector& next = k + 1 < traj.knots() ? traj.states[k + 1] : x;
  return {d.A, d.B, rk4_step(model, x, u, traj.h) - next};
}

}  // namespace

ContinuousLinearization linearize(const MultibodyModel& model, const Vector& xbar,
                                  const Vector& ubar) {
  const int nx = model.nx();
  const int nu = model.nu();
  if (xbar.size() != nx || ubar.size() != nu) {
    throw ContractViolation("linearize: operating point has wrong dimension");
  }
  ContinuousLinearization out;
  out.f = forward_dynamics(model, xbar, ubar);
  out.A.resize(nx, nx);
  out.B.resize(nx, nu);
  for (int i = 0; i < nx; ++i) {
    const double e = fd_step(xbar[i]);
    Vector xp = xbar, xm = xbar;
    xp[i] += e;
    xm[i] -= e;
    out.A.col(i) = (forward_dynamics(model, xp, ubar) - forward_dynamics(model, xm, ubar)) /
                   (xp[i] - xm[i]);
  }
  for (int i = 0; i < nu; ++i) {
    const double e = fd_step(ubar[i]);
    Vector up = ubar, um = ubar;
    up[i] += e;
    um[i] -= e;
    out.B.col(i) = (forward_dynamics(model, xbar, up) - forward_dynamics(model, xbar, um)) /
                   (up[i] - um[i]);
  }
  return out;
}

ContinuousLinearization linearize_exact(const MultibodyModel& model, const Vector& xbar,
                                        const Vector& ubar) {
  DynamicsJacobian j = dynamics_jacobian(model, xbar, ubar);
  return {std::move(j.fx), std::move(j.fu), std::move(j.value)};
}

DiscreteLinearization discretize(const Matrix& A, const Matrix& B, double h) {
  if (!(h > 0.0)) throw ContractViolation("discretize: step size must be positive");
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw ContractViolation("discretize: inconsistent matrix dimensions");
  }
  const auto n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  const Matrix A3 = A2 * A;
  const Matrix A4 = A3 * A;
  const double h2 = h * h, h3 = h2 * h, h4 = h3 * h;
  DiscreteLinearization d;
  d.A = I + h * A + (h2 / 2.0) * A2 + (h3 / 6.0) * A3 + (h4 / 24.0) * A4;
  d.B = (h * I + (h2 / 2.0) * A + (h3 / 6.0) * A2 + (h4 / 24.0) * A3) * B;
  return d;
}

LTVSystem build_ltv_along(const MultibodyModel& model, const Trajectory& traj,
                          JacobianMethod method, Execution exec) {
  if (traj.empty()) throw ContractViolation("build_ltv_along: empty trajectory");
  traj.check(model.nx(), model.nu());
  const int n = traj.knots();
  std::vector<KnotResult> knots(n);
  if (exec == Execution::kParallel) {
    // Exceptions cannot cross the parallel region; the first one is rethrown.
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n; ++k) {
      try {
        knots[k] = linearize_knot(model, traj, k, method);
      } catch (...) {
#pragma omp critical(freeflyer_ltv_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (int k = 0; k < n; ++k) knots[k] = linearize_knot(model, traj, k, method);
  }

  LTVSystem ltv;
  ltv.h = traj.h;
  for (int k = 0; k < n; ++k) {
    ltv.A.push_back(std::move(knots[k].A));
    ltv.B.push_back(std::move(knots[k].B));
    ltv.g.push_back(std::move(knots[k].g));
    ltv.xbar.push_back(traj.states[k]);
    ltv.ubar.push_back(traj.control_or_zero(k, model.nu()));
  }
  return ltv;
}

LTVSystem constant_ltv(const DiscreteLinearization& d, const Vector& g, const Vector& xbar,
                       const Vector& ubar, double h, int n) {
  LTVSystem ltv;
  ltv.h = h;
  ltv.A.assign(n, d.A);
  ltv.B.assign(n, d.B);
  ltv.g.assign(n, g);
  ltv.xbar.assign(n, xbar);
  ltv.ubar.assign(n, ubar);
  return ltv;
}

}  // namespace freeflyer
