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

#ifndef FREEFLYER_SMOOTHER_HPP_
#define FREEFLYER_SMOOTHER_HPP_

#include <cstdint>
#include <vector>

#include "freeflyer/collision.hpp"
#include "freeflyer/lqr.hpp"
#include "freeflyer/robot.hpp"
#include "freeflyer/trajectory.hpp"

namespace freeflyer {

// Untimed sequence of states. Length is measured in the configuration
// coordinates (the first half of each state vector).
class GeometricPath {
 public:
  GeometricPath() = default;
  explicit GeometricPath(std::vector<Vector> states);
  static GeometricPath from_trajectory(const Trajectory& traj);

  const std::vector<Vector>& states() const { return states_; }
  const std::vector<double>& cumulative_length() const { return length_; }
  int knots() const { return static_cast<int>(states_.size()); }
  double length() const { return length_.empty() ? 0.0 : length_.back(); }

  // State at arc length s in [0, length()], linear within a segment.
  Vector at(double s) const;
  // Unit tangent of the configuration at arc length s (zero on a degenerate path).
  Vector tangent(double s) const;

 private:
  std::vector<Vector> states_;
  std::vector<double> length_;
};

double configuration_distance(const Vector& a, const Vector& b);

struct ShortcutConfig {
  int iterations = 200;
  std::uint64_t seed = 1;
  double h_check = 0.0;        // <= 0 picks the field's default resolution
  double knot_spacing = 0.25;  // max configuration distance between inserted knots
};

struct ShortcutResult {
  GeometricPath path;
  int accepted = 0;
  std::vector<double> length_history;  // after every accepted splice, starting with the input
};

// Random shortcutting between two continuous path parameters a < b. A splice
// is kept only when the straight segment is collision-free and shortens the
// path. Endpoints never move.
ShortcutResult shortcut(const GeometricPath& path, const ObstacleField& obstacles,
                        const ShortcutConfig& config);

struct RetimeConfig {
  double h = 0.2;           // s
  double v_max = 0.25;      // configuration units per s
  double a_max = 0.1;       // configuration units per s^2
  double settle_time = 6.0; // s of holding the final state
};

// Path-parameterized reference (quintic time scaling, rest to rest) with zero
// nominal controls.
Trajectory path_reference(const GeometricPath& path, const RetimeConfig& config);

// LQR tracking of path_reference() from the path's first configuration at
// rest. The result is a genuine rollout of the nonlinear dynamics.
Trajectory retime(const MultibodyModel& model, const GeometricPath& path,
                  const QuadraticCost& cost, const RetimeConfig& config);

// Largest distance from a trajectory's base positions to the path polyline.
double max_path_deviation(const GeometricPath& path, const Trajectory& traj);

// World angular velocity producing the given Z-Y-X Euler-angle rates.
Vec3 angular_velocity_from_rates(const Vec3& euler, const Vec3& rates);

}  // namespace freeflyer

#endif  // FREEFLYER_SMOOTHER_HPP_
