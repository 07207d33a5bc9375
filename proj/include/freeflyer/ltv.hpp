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

#ifndef FREEFLYER_LTV_HPP_
#define FREEFLYER_LTV_HPP_

#include <vector>

#include "freeflyer/execution.hpp"
#include "freeflyer/robot.hpp"
#include "freeflyer/trajectory.hpp"

namespace freeflyer {

// Continuous-time Jacobians of f at an operating point.
struct ContinuousLinearization {
  Matrix A;  // df/dx
  Matrix B;  // df/du
  Vector f;  // f(xbar, ubar)
};

// Central differences with per-coordinate step max(1e-6, 1e-6 |c|).
ContinuousLinearization linearize(const MultibodyModel& model, const Vector& xbar,
                                  const Vector& ubar);

// Same quantities by forward-mode differentiation; agrees with linearize() to
// the finite-difference truncation error.
ContinuousLinearization linearize_exact(const MultibodyModel& model, const Vector& xbar,
                                        const Vector& ubar);

struct DiscreteLinearization {
  Matrix A;
  Matrix B;
};

// RK4 with the control held over the step, applied to dx/dt = A dx + B du:
//   A_k = I + hA + h^2 A^2/2 + h^3 A^3/6 + h^4 A^4/24
//   B_k = (h + h^2 A/2 + h^3 A^2/6 + h^4 A^3/24) B
DiscreteLinearization discretize(const Matrix& A, const Matrix& B, double h);

// x_{k+1} ~= xbar_{k+1} + A_k dx_k + B_k du_k + g_k with
// g_k = rk4_step(xbar_k, ubar_k) - xbar_{k+1}. The final knot has no successor
// and is linearized as holding itself.
struct LTVSystem {
  double h = 0.1;
  std::vector<Matrix> A;
  std::vector<Matrix> B;
  std::vector<Vector> g;
  std::vector<Vector> xbar;
  std::vector<Vector> ubar;

  int size() const { return static_cast<int>(A.size()); }
  int nx() const { return A.empty() ? 0 : static_cast<int>(A.front().rows()); }
  int nu() const { return B.empty() ? 0 : static_cast<int>(B.front().cols()); }
};

enum class JacobianMethod { kCentralDifference, kForwardMode };

LTVSystem build_ltv_along(const MultibodyModel& model, const Trajectory& traj,
                          JacobianMethod method = JacobianMethod::kCentralDifference,
                          Execution exec = Execution::kParallel);

// N copies of one discrete linearization (time-invariant system).
LTVSystem constant_ltv(const DiscreteLinearization& d, const Vector& g, const Vector& xbar,
                       const Vector& ubar, double h, int n);

}  // namespace freeflyer

#endif  // FREEFLYER_LTV_HPP_
