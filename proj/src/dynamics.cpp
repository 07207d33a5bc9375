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

#include "freeflyer/dynamics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <ceres/jet.h>

#include "freeflyer/errors.hpp"
#include "multibody_impl.hpp"

namespace freeflyer {

namespace {

using detail::DofVec;
using DofMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDof, kMaxDof>;
using Spatial6 = Eigen::Matrix<double, 6, 1>;
using Inertia6 = Eigen::Matrix<double, 6, 6>;

// Euler-singularity guard band, rad.
constexpr double kPitchGuard = 1e-3;

void check_state(const MultibodyModel& model, const Vector& x, const char* op) {
  if (x.size() != model.nx()) {
    throw ContractViolation(std::string(op) + ": state has dimension " +
                            std::to_string(x.size()) + ", expected " +
                            std::to_string(model.nx()));
  }
}

void check_control(const MultibodyModel& model, const Vector& u, const char* op) {
  if (u.size() != model.nu()) {
    throw ContractViolation(std::string(op) + ": control has dimension " +
                            std::to_string(u.size()) + ", expected " +
                            std::to_string(model.nu()));
  }
}

void check_pitch(double pitch) {
  if (std::abs(std::cos(pitch)) < std::sin(kPitchGuard)) {
    throw SingularityError("Euler-angle singularity: pitch " + std::to_string(pitch) +
                           " rad is within 1e-3 of +-pi/2");
  }
}

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return k;
}

DofVec<double> config_of(const MultibodyModel& model, const Vector& x) {
  return x.head(model.nq());
}
DofVec<double> velocity_of(const MultibodyModel& model, const Vector& x) {
  return x.tail(model.nq());
}

DofMat crba(const MultibodyModel& model, const Vector& x) {
  const auto& links = model.links();
  const int n = static_cast<int>(links.size());
  const int nq = model.nq();
  const auto fr = detail::forward_kinematics<double>(model, config_of(model, x));

  std::array<Inertia6, kMaxLinks> composite;
  for (int i = 0; i < n; ++i) {
    const auto& f = fr.link[i];
    const Vec3 c = f.position + f.rotation * links[i].com;
    const Mat3 ct = skew(c);
    const double m = links[i].mass;
    Inertia6& I = composite[i];
    I.topLeftCorner<3, 3>() =
        f.rotation * links[i].inertia * f.rotation.transpose() + m * ct * ct.transpose();
    I.topRightCorner<3, 3>() = m * ct;
    I.bottomLeftCorner<3, 3>() = m * ct.transpose();
    I.bottomRightCorner<3, 3>() = m * Mat3::Identity();
  }
  for (int i = n - 1; i >= 1; --i) composite[links[i].parent] += composite[i];

  Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, kMaxDof> S(6, nq);
  std::array<int, kMaxDof> owner{};
  S.setZero();
  const Vec3 r = fr.link[0].position;
  for (int k = 0; k < 3; ++k) {
    S(3 + k, k) = 1.0;
    const Vec3 e = Vec3::Unit(k);
    S.col(3 + k).head<3>() = e;
    S.col(3 + k).tail<3>() = r.cross(e);
    owner[k] = owner[3 + k] = 0;
  }
  for (int i = 1; i < n; ++i) {
    S.col(6 + i - 1).head<3>() = fr.link[i].axis;
    S.col(6 + i - 1).tail<3>() = fr.link[i].axis_lin;
    owner[6 + i - 1] = i;
  }

  DofMat G = DofMat::Zero(nq, nq);
  for (int b = 0; b < nq; ++b) {
    const Spatial6 f = composite[owner[b]] * S.col(b);
    for (int a = 0; a <= b; ++a) {
      if (model.is_ancestor(owner[a], owner[b])) {
        G(a, b) = S.col(a).dot(f);
        G(b, a) = G(a, b);
      } else if (model.is_ancestor(owner[b], owner[a])) {
        G(a, b) = S.col(b).dot(composite[owner[a]] * S.col(a));
        G(b, a) = G(a, b);
      }
    }
  }
  return G;
}

struct Accel {
  DofMat G;
  Eigen::LLT<DofMat> llt;
  DofVec<double> acc;
};

Accel solve_accel(const MultibodyModel& model, const Vector& x, const Vector& u) {
  check_pitch(x[state::euler(model.num_joints()) + 1]);
  Accel out;
  out.G = crba(model, x);
  const DofVec<double> zero = DofVec<double>::Zero(model.nq());
  const DofVec<double> bias =
      detail::rnea<double>(model, config_of(model, x), velocity_of(model, x), zero);
  out.llt.compute(out.G);
  if (out.llt.info() != Eigen::Success) {
    throw SolveFailure("forward_dynamics: mass matrix is not positive definite");
  }
  out.acc = out.llt.solve(DofVec<double>(u - Vector(bias)));
  return out;
}

Vector assemble_xdot(const MultibodyModel& model, const Vector& x, const DofVec<double>& acc) {
  const int nj = model.num_joints();
  const int nq = model.nq();
  Vector xdot(model.nx());
  xdot.head<3>() = x.segment<3>(state::linear_velocity(nj));
  xdot.segment<3>(3) = detail::euler_rates<double>(x.segment<3>(state::euler(nj)),
                                                   x.segment<3>(state::angular_velocity(nj)));
  xdot.segment(6, nj) = x.segment(state::joint_rates(nj), nj);
  xdot.tail(nq) = acc;
  return xdot;
}

}  // namespace

Matrix mass_matrix(const MultibodyModel& model, const Vector& x) {
  check_state(model, x, "mass_matrix");
  return crba(model, x);
}

Vector bias_forces(const MultibodyModel& model, const Vector& x) {
  check_state(model, x, "bias_forces");
  return detail::rnea<double>(model, config_of(model, x), velocity_of(model, x),
                              DofVec<double>::Zero(model.nq()));
}

Vector inverse_dynamics(const MultibodyModel& model, const Vector& x, const Vector& accel) {
  check_state(model, x, "inverse_dynamics");
  check_control(model, accel, "inverse_dynamics");
  return detail::rnea<double>(model, config_of(model, x), velocity_of(model, x), accel);
}

Vector forward_dynamics(const MultibodyModel& model, const Vector& x, const Vector& u) {
  check_state(model, x, "forward_dynamics");
  check_control(model, u, "forward_dynamics");
  return assemble_xdot(model, x, solve_accel(model, x, u).acc);
}

Vec3 euler_rates(const Vec3& euler, const Vec3& omega) {
  check_pitch(euler[1]);
  return detail::euler_rates<double>(euler, omega);
}

Mat3 euler_to_rotation(const Vec3& euler) { return detail::euler_rotation<double>(euler); }

Vector rk4_step(const DynamicsFn& f, const Vector& x, const Vector& u, double h) {
  if (!(h > 0.0)) throw ContractViolation("rk4_step: step size must be positive");
  auto finite = [](const Vector& v) {
    if (!v.allFinite()) throw NumericalOverflow("rk4_step: non-finite intermediate value");
    return v;
  };
  const Vector k1 = finite(f(x, u));
  const Vector k2 = finite(f(x + 0.5 * h * k1, u));
  const Vector k3 = finite(f(x + 0.5 * h * k2, u));
  const Vector k4 = finite(f(x + h * k3, u));
  return finite(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Vector rk4_step(const MultibodyModel& model, const Vector& x, const Vector& u, double h) {
  return rk4_step([&model](const Vector& s, const Vector& c) {
    return forward_dynamics(model, s, c);
  }, x, u, h);
}

Vector integrate(const MultibodyModel& model, const Vector& x, const Vector& u,
                 const IntegratorConfig& cfg) {
  if (cfg.substeps < 1) throw ContractViolation("integrate: substeps must be positive");
  Vector s = x;
  const double dt = cfg.h / cfg.substeps;
  for (int i = 0; i < cfg.substeps; ++i) s = rk4_step(model, s, u, dt);
  return s;
}

double kinetic_energy(const MultibodyModel& model, const Vector& x) {
  check_state(model, x, "kinetic_energy");
  const Vector nu = x.tail(model.nq());
  return 0.5 * nu.dot(crba(model, x) * nu);
}

Eigen::Matrix<double, 6, 1> spatial_momentum(const MultibodyModel& model, const Vector& x) {
  check_state(model, x, "spatial_momentum");
  const auto fr = detail::forward_kinematics<double>(model, config_of(model, x));
  const auto vel = detail::link_velocities<double>(model, fr, velocity_of(model, x));
  Eigen::Matrix<double, 6, 1> h = Eigen::Matrix<double, 6, 1>::Zero();
  for (int i = 0; i < fr.count; ++i) {
    const auto hi = detail::apply_inertia<double>(model.links()[i], fr.link[i], vel[i]);
    h.head<3>() += hi.ang;
    h.tail<3>() += hi.lin;
  }
  return h;
}

std::vector<LinkPose> link_poses(const MultibodyModel& model, const Vector& x) {
  check_state(model, x, "link_poses");
  const auto fr = detail::forward_kinematics<double>(model, config_of(model, x));
  std::vector<LinkPose> out;
  for (int i = 0; i < fr.count; ++i) out.push_back({fr.link[i].rotation, fr.link[i].position});
  return out;
}

Vec3 tool_position(const MultibodyModel& model, const Vector& x) {
  const auto poses = link_poses(model, x);
  return poses.back().position + poses.back().rotation * model.tool_point();
}

DynamicsJacobian dynamics_jacobian(const MultibodyModel& model, const Vector& x,
                                   const Vector& u) {
  check_state(model, x, "dynamics_jacobian");
  check_control(model, u, "dynamics_jacobian");
  constexpr int kLanes = 8;
  using Jet = ceres::Jet<double, kLanes>;

  const int nj = model.num_joints();
  const int nq = model.nq();
  const int nx = model.nx();
  const Accel a = solve_accel(model, x, u);

  DynamicsJacobian out;
  out.value = assemble_xdot(model, x, a.acc);
  out.fx = Matrix::Zero(nx, nx);
  out.fu = Matrix::Zero(nx, nq);

  // d(ID)/dx at fixed acceleration, and d(euler rates)/dx.
  Matrix did_dx(nq, nx);
  DofVec<Jet> acc_jet(nq);
  for (int i = 0; i < nq; ++i) acc_jet[i] = Jet(a.acc[i]);
  for (int start = 0; start < nx; start += kLanes) {
    DofVec<Jet> q(nq), nu(nq);
    for (int i = 0; i < nx; ++i) {
      Jet j(x[i]);
      if (i >= start && i < start + kLanes) j.v[i - start] = 1.0;
      if (i < nq) {
        q[i] = j;
      } else {
        nu[i - nq] = j;
      }
    }
    const DofVec<Jet> tau = detail::rnea<Jet>(model, q, nu, acc_jet);
    const detail::V3<Jet> rates =
        detail::euler_rates<Jet>(q.template segment<3>(3), nu.template segment<3>(3));
    const int lanes = std::min(kLanes, nx - start);
    for (int k = 0; k < lanes; ++k) {
      for (int i = 0; i < nq; ++i) did_dx(i, start + k) = tau[i].v[k];
      for (int i = 0; i < 3; ++i) out.fx(3 + i, start + k) = rates[i].v[k];
    }
  }

  out.fx.block<3, 3>(0, state::linear_velocity(nj)).setIdentity();
  out.fx.block(6, state::joint_rates(nj), nj, nj).setIdentity();
  out.fx.bottomRows(nq) = -a.llt.solve(did_dx);
  out.fu.bottomRows(nq) = a.llt.solve(Matrix::Identity(nq, nq));
  return out;
}

Rk4Linearization::Rk4Linearization(const MultibodyModel& model, const Vector& x,
                                   const Vector& u, double h)
    : h_(h) {
  if (!(h > 0.0)) throw ContractViolation("Rk4Linearization: step size must be positive");
  stage_[0] = dynamics_jacobian(model, x, u);
  stage_[1] = dynamics_jacobian(model, x + 0.5 * h * stage_[0].value, u);
  stage_[2] = dynamics_jacobian(model, x + 0.5 * h * stage_[1].value, u);
  stage_[3] = dynamics_jacobian(model, x + h * stage_[2].value, u);
  next_ = x + (h / 6.0) * (stage_[0].value + 2.0 * stage_[1].value + 2.0 * stage_[2].value +
                           stage_[3].value);
  if (!next_.allFinite()) throw NumericalOverflow("rk4_step: non-finite intermediate value");
}

Matrix Rk4Linearization::state_jacobian() const {
  const auto n = next_.size();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix d1 = stage_[0].fx;
  const Matrix d2 = stage_[1].fx * (I + 0.5 * h_ * d1);
  const Matrix d3 = stage_[2].fx * (I + 0.5 * h_ * d2);
  const Matrix d4 = stage_[3].fx * (I + h_ * d3);
  return I + (h_ / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
}

Matrix Rk4Linearization::control_jacobian() const {
  const Matrix d1 = stage_[0].fu;
  const Matrix d2 = stage_[1].fu + stage_[1].fx * (0.5 * h_ * d1);
  const Matrix d3 = stage_[2].fu + stage_[2].fx * (0.5 * h_ * d2);
  const Matrix d4 = stage_[3].fu + stage_[3].fx * (h_ * d3);
  return (h_ / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
}

std::pair<Vector, Vector> Rk4Linearization::vjp(const Vector& lambda) const {
  Vector lx = lambda;
  Vector lu = Vector::Zero(stage_[0].fu.cols());
  // Adjoints of k4, k3, k2, k1 in turn.
  Vector ak = (h_ / 6.0) * lambda;
  Vector y = stage_[3].fx.transpose() * ak;
  lu.noalias() += stage_[3].fu.transpose() * ak;
  lx += y;
  ak = (h_ / 3.0) * lambda + h_ * y;
  y = stage_[2].fx.transpose() * ak;
  lu.noalias() += stage_[2].fu.transpose() * ak;
  lx += y;
  ak = (h_ / 3.0) * lambda + 0.5 * h_ * y;
  y = stage_[1].fx.transpose() * ak;
  lu.noalias() += stage_[1].fu.transpose() * ak;
  lx += y;
  ak = (h_ / 6.0) * lambda + 0.5 * h_ * y;
  lx.noalias() += stage_[0].fx.transpose() * ak;
  lu.noalias() += stage_[0].fu.transpose() * ak;
  return {lx, lu};
}

}  // namespace freeflyer
