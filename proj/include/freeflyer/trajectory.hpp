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

#ifndef FREEFLYER_TRAJECTORY_HPP_
#define FREEFLYER_TRAJECTORY_HPP_

#include <string>
#include <vector>

#include "freeflyer/robot.hpp"

namespace freeflyer {

// Uniformly sampled state/control sequence. `controls[k]` is held over
// [t_k, t_{k+1}); there is one control fewer than there are states.
struct Trajectory {
  double h = 0.1;
  std::vector<Vector> states;
  std::vector<Vector> controls;

  int knots() const { return static_cast<int>(states.size()); }
  int steps() const { return static_cast<int>(controls.size()); }
  bool empty() const { return states.empty(); }
  double time(int k) const { return k * h; }
  double duration() const { return steps() * h; }
  const Vector& front() const { return states.front(); }
  const Vector& back() const { return states.back(); }

  // Control at knot k; zero at the final knot.
  Vector control_or_zero(int k, int nu) const;

  // Appends `other`, whose first state must coincide with this one's last.
  void append(const Trajectory& other);

  // Throws ContractViolation on inconsistent sizes.
  void check(int nx, int nu) const;
};

// Largest one-step replay residual |rk4_step(x_k, u_k, h) - x_{k+1}|.
double replay_error(const MultibodyModel& model, const Trajectory& traj);

// A single-knot trajectory at `x`.
Trajectory hold(const Vector& x, double h);

// Rows of `t, x..., u...` with the final row's controls zero.
std::string trajectory_to_csv(const Trajectory& traj, int nu);
Trajectory trajectory_from_csv(const std::string& text, int nx, int nu);
std::string trajectory_csv_header(int nx, int nu);

}  // namespace freeflyer

#endif  // FREEFLYER_TRAJECTORY_HPP_
