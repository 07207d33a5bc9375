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

#include "freeflyer/lqr.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"

namespace freeflyer {

namespace {

template <typename T>
const T& pick(const std::vector<T>& v, int k) {
  return v.size() == 1 ? v.front() : v.at(k);
}

void check_shape(const Matrix& m, int rows, int cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ConfigError("cost weight " + name + " is " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
}

// S <- (S + S')/2, after checking that the recursion has not drifted.
void symmetrize(Matrix& S) {
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw InternalError("Riccati recursion lost symmetry of S");
  }
  S = 0.5 * (S + S.transpose()).eval();
}

}  // namespace

QuadraticCost QuadraticCost::uniform(const Matrix& Q, const Matrix& R, const Matrix& QN) {
  QuadraticCost cost;
  cost.Q = {Q};
  cost.R = {R};
  cost.QN = QN;
  return cost;
}

Matrix QuadraticCost::Q_at(int k) const { return pick(Q, k); }
Matrix QuadraticCost::R_at(int k) const { return pick(R, k); }

Matrix QuadraticCost::P_at(int k) const {
  if (P.empty()) return Matrix::Zero(R.front().rows(), Q.front().rows());
  return pick(P, k);
}

Vector QuadraticCost::q_at(int k) const {
  if (q.empty()) return Vector::Zero(Q.front().rows());
  return pick(q, k);
}

Vector QuadraticCost::r_at(int k) const {
  if (r.empty()) return Vector::Zero(R.front().rows());
  return pick(r, k);
}

Vector QuadraticCost::qN_or_zero() const {
  if (qN.size() == 0) return Vector::Zero(QN.rows());
  return qN;
}

double QuadraticCost::stage(int k, const Vector& dx, const Vector& du) const {
  const Matrix& Qk = pick(Q, k);
  const Matrix& Rk = pick(R, k);
  double v = 0.5 * dx.dot(Qk * dx) + 0.5 * du.dot(Rk * du);
  if (!P.empty()) v += du.dot(pick(P, k) * dx);
  if (!q.empty()) v += pick(q, k).dot(dx);
  if (!r.empty()) v += pick(r, k).dot(du);
  return v;
}

double QuadraticCost::terminal(const Vector& dx) const {
  double v = 0.5 * dx.dot(QN * dx) + c;
  if (qN.size() != 0) v += qN.dot(dx);
  return v;
}

void QuadraticCost::validate(int nx, int nu) const {
  if (Q.empty() || R.empty()) throw ConfigError("cost needs Q and R");
  for (const auto& m : Q) check_shape(m, nx, nx, "Q");
  for (const auto& m : R) {
    check_shape(m, nu, nu, "R");
    Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success) throw ConfigError("cost weight R is not positive definite");
  }
  for (const auto& m : P) check_shape(m, nu, nx, "P");
  for (const auto& v : q) check_shape(v, nx, 1, "q");
  for (const auto& v : r) check_shape(v, nu, 1, "r");
  check_shape(QN, nx, nx, "Q_N");
  if (qN.size() != 0) check_shape(qN, nx, 1, "q_N");
}

ValueFunctionSequence riccati_backward_pass(const LTVSystem& ltv, const QuadraticCost& cost,
                                            int horizon) {
  const int N = horizon < 0 ? ltv.size() : horizon;
  if (N > ltv.size()) throw ContractViolation("riccati_backward_pass: horizon exceeds system");
  const int nx = ltv.nx() > 0 ? ltv.nx() : static_cast<int>(cost.QN.rows());
  const int nu = ltv.nu() > 0 ? ltv.nu() : static_cast<int>(cost.R.front().rows());
  cost.validate(nx, nu);

  ValueFunctionSequence v;
  v.S.resize(N + 1);
  v.s.resize(N + 1);
  v.c.resize(N + 1);
  v.K.resize(N);
  v.l.resize(N);
  v.S[N] = cost.QN;
  symmetrize(v.S[N]);
  v.s[N] = cost.qN_or_zero();
  v.c[N] = cost.c;

  for (int k = N - 1; k >= 0; --k) {
    const Matrix& A = ltv.A[k];
    const Matrix& B = ltv.B[k];
    const Vector& g = ltv.g[k];
    const Matrix& S1 = v.S[k + 1];
    const Vector& s1 = v.s[k + 1];

    const Matrix SA = S1 * A;
    const Matrix SB = S1 * B;
    const Vector Sg = S1 * g;
    const Matrix M = cost.R_at(k) + B.transpose() * SB;
    const Matrix G = SB.transpose() * A + cost.P_at(k);
    const Vector hk = B.transpose() * (Sg + s1) + cost.r_at(k);

    Eigen::LLT<Matrix> llt(0.5 * (M + M.transpose()));
    if (llt.info() != Eigen::Success) {
      throw SolveFailure("Riccati step " + std::to_string(k) +
                         ": R + B'SB is not positive definite");
    }
    v.K[k] = -llt.solve(G);
    v.l[k] = -llt.solve(hk);

    v.S[k] = cost.Q_at(k) + A.transpose() * SA + G.transpose() * v.K[k];
    symmetrize(v.S[k]);
    v.s[k] = cost.q_at(k) + A.transpose() * (s1 + Sg) + G.transpose() * v.l[k];
    v.c[k] = v.c[k + 1] + 0.5 * g.dot(Sg) + s1.dot(g) + 0.5 * hk.dot(v.l[k]);
  }
  return v;
}

double cost_to_go(const ValueFunctionSequence& vfs, int k, const Vector& dx) {
  if (k < 0 || k >= static_cast<int>(vfs.S.size())) {
    throw ContractViolation("cost_to_go: step out of range");
  }
  return 0.5 * dx.dot(vfs.S[k] * dx) + dx.dot(vfs.s[k]) + vfs.c[k];
}

LinearRollout rollout_linear(const LTVSystem& ltv, const ValueFunctionSequence& vfs,
                             const QuadraticCost& cost, const Vector& dx0) {
  LinearRollout out;
  out.dx.push_back(dx0);
  for (int k = 0; k < vfs.horizon(); ++k) {
    const Vector& dx = out.dx.back();
    Vector du = vfs.K[k] * dx + vfs.l[k];
    out.cost += cost.stage(k, dx, du);
    out.dx.push_back(ltv.A[k] * dx + ltv.B[k] * du + ltv.g[k]);
    out.du.push_back(std::move(du));
  }
  out.cost += cost.terminal(out.dx.back());
  return out;
}

SteeringPolicy::SteeringPolicy(const MultibodyModel& model, const Vector& target,
                               const QuadraticCost& cost, double h, int max_horizon)
    : cost_(cost), h_(h) {
  if (max_horizon < 1) throw ContractViolation("SteeringPolicy: horizon must be at least 1");
  if (cost.Q.size() != 1 || cost.R.size() != 1 || cost.P.size() > 1 || cost.q.size() > 1 ||
      cost.r.size() > 1) {
    throw ContractViolation("SteeringPolicy: cost must be time invariant");
  }
  const Vector u0 = Vector::Zero(model.nu());
  const ContinuousLinearization c = linearize(model, target, u0);
  discrete_ = discretize(c.A, c.B, h);
  g_ = rk4_step(model, target, u0, h) - target;
  const LTVSystem ltv = constant_ltv(discrete_, g_, target, u0, h, max_horizon);
  vfs_ = riccati_backward_pass(ltv, cost_);
}

SteerResult SteeringPolicy::steer(const MultibodyModel& model, const Vector& from,
                                  const Vector& target, int horizon) const {
  if (horizon < 1 || horizon > max_horizon()) {
    throw ContractViolation("steer: horizon outside [1, " + std::to_string(max_horizon()) + "]");
  }
  const int offset = max_horizon() - horizon;
  SteerResult out;
  out.trajectory.h = h_;
  out.trajectory.states.reserve(horizon + 1);
  out.trajectory.controls.reserve(horizon);
  Vector x = from;
  out.trajectory.states.push_back(x);
  for (int k = 0; k < horizon; ++k) {
    const Vector dx = x - target;
    Vector u = vfs_.K[offset + k] * dx + vfs_.l[offset + k];
    out.cost += cost_.stage(offset + k, dx, u);
    x = rk4_step(model, x, u, h_);
    out.trajectory.controls.push_back(std::move(u));
    out.trajectory.states.push_back(x);
  }
  out.cost += cost_.terminal(x - target);
  return out;
}

double SteeringPolicy::cost_to_go(const Vector& dx, int horizon) const {
  return freeflyer::cost_to_go(vfs_, max_horizon() - horizon, dx);
}

SteerResult lqr_steer(const MultibodyModel& model, const Vector& from, const Vector& to,
                      int horizon, const QuadraticCost& cost, double h) {
  const SteeringPolicy policy(model, to, cost, h, horizon);
  return policy.steer(model, from, to, horizon);
}

Trajectory track(const MultibodyModel& model, const Trajectory& reference,
                 const QuadraticCost& cost, const Vector& x0) {
  reference.check(model.nx(), model.nu());
  if (x0.size() != model.nx()) throw ContractViolation("track: x0 has wrong dimension");
  const LTVSystem ltv = build_ltv_along(model, reference);
  const ValueFunctionSequence vfs = riccati_backward_pass(ltv, cost, reference.steps());

  Trajectory out;
  out.h = reference.h;
  out.states.reserve(reference.knots());
  out.controls.reserve(reference.steps());
  Vector x = x0;
  out.states.push_back(x);
  for (int k = 0; k < reference.steps(); ++k) {
    Vector u = reference.controls[k] + vfs.K[k] * (x - reference.states[k]) + vfs.l[k];
    x = rk4_step(model, x, u, reference.h);
    out.controls.push_back(std::move(u));
    out.states.push_back(x);
  }
  return out;
}

}  // namespace freeflyer
