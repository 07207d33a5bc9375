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

#ifndef FREEFLYER_LQR_HPP_
#define FREEFLYER_LQR_HPP_

#include <vector>

#include "freeflyer/ltv.hpp"
#include "freeflyer/robot.hpp"
#include "freeflyer/trajectory.hpp"

namespace freeflyer {

// Running cost
//   l_k(dx, du) = 1/2 dx'Q dx + 1/2 du'R du + du'P dx + q'dx + r'du
// and terminal cost l_N(dx) = 1/2 dx'Q_N dx + q_N'dx + c.
// Each running term is either one entry (used at every step) or one per step.
struct QuadraticCost {
  std::vector<Matrix> Q;
  std::vector<Matrix> R;
  std::vector<Matrix> P;  // nu x nx; empty means zero
  std::vector<Vector> q;  // empty means zero
  std::vector<Vector> r;  // empty means zero
  Matrix QN;
  Vector qN;  // empty means zero
  double c = 0.0;

  static QuadraticCost uniform(const Matrix& Q, const Matrix& R, const Matrix& QN);

  Matrix Q_at(int k) const;
  Matrix R_at(int k) const;
  Matrix P_at(int k) const;
  Vector q_at(int k) const;
  Vector r_at(int k) const;
  Vector qN_or_zero() const;

  double stage(int k, const Vector& dx, const Vector& du) const;
  double terminal(const Vector& dx) const;

  // Throws ConfigError when a weight is missing, has the wrong shape, or R is
  // not positive definite.
  void validate(int nx, int nu) const;
};

// Quadratic value function V_k(dx) = 1/2 dx'S_k dx + dx's_k + c_k for
// k = 0..N and the affine policy du_k = K_k dx_k + l_k for k = 0..N-1.
struct ValueFunctionSequence {
  std::vector<Matrix> S;
  std::vector<Vector> s;
  std::vector<double> c;
  std::vector<Matrix> K;
  std::vector<Vector> l;

  int horizon() const { return static_cast<int>(K.size()); }
};

// Backward Riccati recursion over the first `horizon` stages of `ltv`
// (all of them when horizon < 0).
ValueFunctionSequence riccati_backward_pass(const LTVSystem& ltv, const QuadraticCost& cost,
                                            int horizon = -1);

double cost_to_go(const ValueFunctionSequence& vfs, int k, const Vector& dx);

// The policy applied to the linear system itself, from dx0.
struct LinearRollout {
  std::vector<Vector> dx;  // N + 1
  std::vector<Vector> du;  // N
  double cost = 0.0;
};
LinearRollout rollout_linear(const LTVSystem& ltv, const ValueFunctionSequence& vfs,
                             const QuadraticCost& cost, const Vector& dx0);

struct SteerResult {
  Trajectory trajectory;
  double cost = 0.0;  // running + terminal cost along the nonlinear rollout
};

// Time-invariant LQR about a target state with zero nominal control. The
// backward pass is run once for  steps; steering over N <= max
// steps reuses its last N stages.
class SteeringPolicy {
 public:
  SteeringPolicy(const MultibodyModel& model, const Vector& target, const QuadraticCost& cost,
                 double h, int max_horizon);

  // Rolls the policy out on the nonlinear dynamics from `from` for `horizon`
  // steps. `target` may differ from the linearization point by a rigid
  // translation of the base.
  SteerResult steer(const MultibodyModel& model, const Vector& from, const Vector& target,
                    int horizon) const;

  // Value of the horizon-step problem at dx = x - target.
  double cost_to_go(const Vector& dx, int horizon) const;

  const DiscreteLinearization& discrete() const { return discrete_; }
  const Vector& drift() const { return g_; }
  const ValueFunctionSequence& values() const { return vfs_; }
  const QuadraticCost& cost() const { return cost_; }
  int max_horizon() const { return vfs_.horizon(); }
  double h() const { return h_; }

 private:
  QuadraticCost cost_;
  double h_;
  DiscreteLinearization discrete_;
  Vector g_;
  ValueFunctionSequence vfs_;
};

SteerResult lqr_steer(const MultibodyModel& model, const Vector& from, const Vector& to,
                      int horizon, const QuadraticCost& cost, double h);

// Closed-loop rollout of the time-varying LQR built about `reference` from x0.
// The result has as many knots as the reference.
Trajectory track(const MultibodyModel& model, const Trajectory& reference,
                 const QuadraticCost& cost, const Vector& x0);

}  // namespace freeflyer

#endif  // FREEFLYER_LQR_HPP_
