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

#ifndef FREEFLYER_DYNAMICS_HPP_
#define FREEFLYER_DYNAMICS_HPP_

#include <array>
#include <functional>
#include <utility>

#include "freeflyer/robot.hpp"

namespace freeflyer {

struct IntegratorConfig {
  double h = 0.1;    // s
  int substeps = 1;  // RK4 steps per h
};

// Generalized inertia matrix G(x) by the composite-rigid-body recursion.
Matrix mass_matrix(const MultibodyModel& model, const Vector& x);

// D(x, xdot) xdot: recursive Newton-Euler with zero generalized accelerations.
Vector bias_forces(const MultibodyModel& model, const Vector& x);

// tau = G(x) accel + D(x, xdot) xdot, by one Newton-Euler pass.
Vector inverse_dynamics(const MultibodyModel& model, const Vector& x, const Vector& accel);

// Continuous dynamics xdot = f(x, u). Throws SingularityError within 1e-3 rad
// of pitch = +-pi/2 and SolveFailure when G is not positive definite.
Vector forward_dynamics(const MultibodyModel& model, const Vector& x, const Vector& u);

// Euler-angle rates (roll, pitch, yaw) from a world-frame angular velocity.
Vec3 euler_rates(const Vec3& euler, const Vec3& omega);

// Z-Y-X: R = Rz(yaw) Ry(pitch) Rx(roll).
Mat3 euler_to_rotation(const Vec3& euler);

using DynamicsFn = std::function<Vector(const Vector&, const Vector&)>;

// Classic RK4 with the control held over the step. Throws NumericalOverflow if
// any stage goes non-finite.
Vector rk4_step(const DynamicsFn& f, const Vector& x, const Vector& u, double h);
Vector rk4_step(const MultibodyModel& model, const Vector& x, const Vector& u, double h);

// `cfg.substeps` RK4 steps of size cfg.h / cfg.substeps.
Vector integrate(const MultibodyModel& model, const Vector& x, const Vector& u,
                 const IntegratorConfig& cfg);

double kinetic_energy(const MultibodyModel& model, const Vector& x);

// Total spatial momentum in world coordinates: (angular about the world
// origin, linear).
Eigen::Matrix<double, 6, 1> spatial_momentum(const MultibodyModel& model, const Vector& x);

// World pose of every link frame.
struct LinkPose {
  Mat3 rotation;
  Vec3 position;
};
std::vector<LinkPose> link_poses(const MultibodyModel& model, const Vector& x);

// World position of the end-effector point.
Vec3 tool_position(const MultibodyModel& model, const Vector& x);

// Exact first derivatives of f, by forward-mode differentiation of the
// Newton-Euler pass and the Euler-rate map.
struct DynamicsJacobian {
  Vector value;  // f(x, u)
  Matrix fx;     // nx x nx
  Matrix fu;     // nx x nu
};
DynamicsJacobian dynamics_jacobian(const MultibodyModel& model, const Vector& x, const Vector& u);

// One RK4 step together with the stage Jacobians needed to differentiate it.
class Rk4Linearization {
 public:
  Rk4Linearization(const MultibodyModel& model, const Vector& x, const Vector& u, double h);

  const Vector& next_state() const { return next_; }
  Matrix state_jacobian() const;    // d x_next / d x
  Matrix control_jacobian() const;  // d x_next / d u

  // Adjoint sweep through the four stages: returns (lambda' dx_next/dx,
  // lambda' dx_next/du).
  std::pair<Vector, Vector> vjp(const Vector& lambda) const;

 private:
  double h_;
  Vector next_;
  std::array<DynamicsJacobian, 4> stage_;
};

}  // namespace freeflyer

#endif  // FREEFLYER_DYNAMICS_HPP_
