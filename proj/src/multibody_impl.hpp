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

// Scalar-templated kinematics and Newton-Euler pass. Instantiated with double
// for simulation and with ceres::Jet for exact Jacobians.
#ifndef FREEFLYER_SRC_MULTIBODY_IMPL_HPP_
#define FREEFLYER_SRC_MULTIBODY_IMPL_HPP_

#include <array>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "freeflyer/robot.hpp"

namespace freeflyer::detail {

template <typename T>
using V3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using M3 = Eigen::Matrix<T, 3, 3>;
template <typename T>
using DofVec = Eigen::Matrix<T, Eigen::Dynamic, 1, 0, kMaxDof, 1>;

template <typename T>
M3<T> euler_rotation(const V3<T>& e) {
  using std::cos;
  using std::sin;
  const T cr = cos(e[0]), sr = sin(e[0]);
  const T cp = cos(e[1]), sp = sin(e[1]);
  const T cy = cos(e[2]), sy = sin(e[2]);
  M3<T> r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  return r;
}

// omega = E(euler) * euler_dot, inverted in closed form. Singular at cos(pitch) = 0.
template <typename T>
V3<T> euler_rates(const V3<T>& e, const V3<T>& w) {
  using std::cos;
  using std::sin;
  const T cp = cos(e[1]), sp = sin(e[1]);
  const T cy = cos(e[2]), sy = sin(e[2]);
  const T roll_rate = (w[0] * cy + w[1] * sy) / cp;
  V3<T> out;
  out[0] = roll_rate;
  out[1] = -w[0] * sy + w[1] * cy;
  out[2] = w[2] + sp * roll_rate;
  return out;
}

template <typename T>
M3<T> axis_rotation(const Vec3& axis, const T& angle) {
  using std::cos;
  using std::sin;
  M3<T> k;
  k << T(0), T(-axis.z()), T(axis.y()),
       T(axis.z()), T(0), T(-axis.x()),
       T(-axis.y()), T(axis.x()), T(0);
  return M3<T>::Identity() + sin(angle) * k + (T(1) - cos(angle)) * (k * k);
}

// Per-link world quantities. Spatial vectors are Plucker coordinates at the
// world origin, split into angular and linear parts.
template <typename T>
struct LinkFrame {
  M3<T> rotation;
  V3<T> position;
  V3<T> axis;      // joint axis, world (unused for the base)
  V3<T> axis_lin;  // position x axis: linear part of the joint motion column
};

template <typename T>
struct Frames {
  std::array<LinkFrame<T>, kMaxLinks> link;
  int count = 0;
};

// q = [r, euler, q_m].
template <typename T>
Frames<T> forward_kinematics(const MultibodyModel& model, const DofVec<T>& q) {
  const auto& links = model.links();
  Frames<T> out;
  out.count = static_cast<int>(links.size());
  out.link[0].rotation = euler_rotation<T>(q.template segment<3>(3));
  out.link[0].position = q.template head<3>();
  for (int i = 1; i < out.count; ++i) {
    const Link& l = links[i];
    const LinkFrame<T>& p = out.link[l.parent];
    LinkFrame<T>& f = out.link[i];
    f.rotation = p.rotation * axis_rotation<T>(l.axis, q[6 + i - 1]);
    f.position = p.position + p.rotation * l.origin.cast<T>();
    f.axis = p.rotation * l.axis.cast<T>();
    f.axis_lin = f.position.cross(f.axis);
  }
  return out;
}

template <typename T>
struct Spatial {
  V3<T> ang;
  V3<T> lin;
};

// Spatial inertia of `link` (world origin coordinates) applied to a motion.
template <typename T>
Spatial<T> apply_inertia(const Link& link, const LinkFrame<T>& frame, const Spatial<T>& m) {
  const V3<T> c = frame.position + frame.rotation * link.com.cast<T>();
  const V3<T> lin = link.mass * (m.lin + m.ang.cross(c));
  const V3<T> ang =
      frame.rotation * (link.inertia.cast<T>() * (frame.rotation.transpose() * m.ang)) +
      c.cross(lin);
  return {ang, lin};
}

// Spatial velocity of every link for generalized velocity nu = [v, omega, qdot].
template <typename T>
std::array<Spatial<T>, kMaxLinks> link_velocities(const MultibodyModel& model,
                                                  const Frames<T>& fr, const DofVec<T>& nu) {
  const auto& links = model.links();
  std::array<Spatial<T>, kMaxLinks> vel;
  const V3<T> r = fr.link[0].position;
  const V3<T> w = nu.template segment<3>(3);
  vel[0] = {w, V3<T>(nu.template head<3>() + r.cross(w))};
  for (int i = 1; i < fr.count; ++i) {
    const T qd = nu[6 + i - 1];
    const auto& p = vel[links[i].parent];
    vel[i] = {p.ang + fr.link[i].axis * qd, p.lin + fr.link[i].axis_lin * qd};
  }
  return vel;
}

// Recursive Newton-Euler: tau = G(q) acc + D(q, nu) nu (zero gravity).
template <typename T>
DofVec<T> rnea(const MultibodyModel& model, const DofVec<T>& q, const DofVec<T>& nu,
               const DofVec<T>& acc) {
  const auto& links = model.links();
  const Frames<T> fr = forward_kinematics<T>(model, q);
  const auto vel = link_velocities<T>(model, fr, nu);
  const int n = fr.count;

  std::array<Spatial<T>, kMaxLinks> accel;
  const V3<T> r = q.template head<3>();
  const V3<T> v = nu.template head<3>();
  const V3<T> w = nu.template segment<3>(3);
  const V3<T> wd = acc.template segment<3>(3);
  // d/dt of (omega, v + r x omega); v = rdot.
  accel[0] = {wd, V3<T>(acc.template head<3>() + r.cross(wd) + v.cross(w))};
  for (int i = 1; i < n; ++i) {
    const T qd = nu[6 + i - 1];
    const T qdd = acc[6 + i - 1];
    const auto& pa = accel[links[i].parent];
    const auto& vi = vel[i];
    const V3<T>& ax = fr.link[i].axis;
    const V3<T>& al = fr.link[i].axis_lin;
    // A_i = A_p + (V_i x S_i) qd + S_i qdd
    accel[i].ang = pa.ang + vi.ang.cross(ax) * qd + ax * qdd;
    accel[i].lin = pa.lin + (vi.ang.cross(al) + vi.lin.cross(ax)) * qd + al * qdd;
  }

  std::array<Spatial<T>, kMaxLinks> force;
  for (int i = 0; i < n; ++i) {
    const auto ia = apply_inertia<T>(links[i], fr.link[i], accel[i]);
    const auto h = apply_inertia<T>(links[i], fr.link[i], vel[i]);
    // f = I A + V x* (I V)
    force[i].ang = ia.ang + vel[i].ang.cross(h.ang) + vel[i].lin.cross(h.lin);
    force[i].lin = ia.lin + vel[i].ang.cross(h.lin);
  }

  DofVec<T> tau(model.nq());
  for (int i = n - 1; i >= 1; --i) {
    tau[6 + i - 1] = fr.link[i].axis.dot(force[i].ang) + fr.link[i].axis_lin.dot(force[i].lin);
    auto& p = force[links[i].parent];
    p.ang += force[i].ang;
    p.lin += force[i].lin;
  }
  tau.template head<3>() = force[0].lin;
  tau.template segment<3>(3) = force[0].ang - r.cross(force[0].lin);
  return tau;
}

}  // namespace freeflyer::detail

#endif  // FREEFLYER_SRC_MULTIBODY_IMPL_HPP_
