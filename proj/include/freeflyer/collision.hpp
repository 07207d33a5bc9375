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

#ifndef FREEFLYER_COLLISION_HPP_
#define FREEFLYER_COLLISION_HPP_

#include <string>
#include <vector>

#include "freeflyer/execution.hpp"
#include "freeflyer/robot.hpp"

namespace freeflyer {

// Keep-out region {x : (x - c)' (P / s^2) (x - c) < 1}. A moving obstacle
// lists one centre per time index; indices past the end reuse the last one.
class EllipsoidObstacle {
 public:
  EllipsoidObstacle(const Vec3& center, const Mat3& shape, double safety_factor = 1.0,
                    std::string name = "");
  EllipsoidObstacle(std::vector<Vec3> centers, const Mat3& shape, double safety_factor = 1.0,
                    std::string name = "");

  // Axis-aligned ellipsoid with the given semi-axes (m).
  static EllipsoidObstacle with_semi_axes(const Vec3& center, const Vec3& semi_axes,
                                          double safety_factor = 1.0, std::string name = "");

  const Vec3& center(int k = 0) const;
  const std::vector<Vec3>& centers() const { return centers_; }
  const Mat3& shape() const { return shape_; }
  double safety_factor() const { return safety_; }
  const std::string& name() const { return name_; }

  // P / s^2, the matrix actually used in the quadratic form.
  const Mat3& effective_shape() const { return effective_; }

  // Smallest semi-axis of the inflated ellipsoid, s / sqrt(lambda_max(P)).
  double min_semi_axis() const { return min_semi_axis_; }

  double quadratic_form(const Vec3& x, int k = 0) const;

  // A copy with the safety factor multiplied by `factor`.
  EllipsoidObstacle inflated(double factor) const;

 private:
  std::vector<Vec3> centers_;
  Mat3 shape_;
  double safety_;
  std::string name_;
  Mat3 effective_;
  double min_semi_axis_;
};

struct ObstacleField {
  std::vector<EllipsoidObstacle> obstacles;

  int size() const { return static_cast<int>(obstacles.size()); }
  bool empty() const { return obstacles.empty(); }
  void add(EllipsoidObstacle obs) { obstacles.push_back(std::move(obs)); }
  ObstacleField inflated(double factor) const;

  // Half the smallest semi-axis over all obstacles; +inf for an empty field.
  double default_check_resolution() const;
};

// (x - c)'P(x - c) >= 1; the boundary counts as clear.
bool point_clear(const EllipsoidObstacle& obs, const Vec3& x, int k = 0);
bool point_clear(const ObstacleField& field, const Vec3& x, int k = 0);

// Every point of a dyadic subdivision of [xa, xb] with spacing <= h_check is
// clear of every obstacle. Refining h_check only adds points. With strict set,
// h_check above the field's default resolution is a ConfigError.
bool segment_clear(const ObstacleField& field, const Vec3& xa, const Vec3& xb, double h_check,
                   int k = 0, bool strict = false);

// Number of intervals segment_clear uses for a segment of this length.
int segment_subdivisions(double length, double h_check);

// Residuals 1 - (x_j - c_i)'P_i(x_j - c_i), obstacle-major: entry i * N + j
// for obstacle i and knot j. Knot j is evaluated at time index k0 + j.
Vector trajectory_constraint(const std::vector<Vec3>& positions, const ObstacleField& field,
                             int k0 = 0, Execution exec = Execution::kParallel);

// True when the two inflated ellipsoids (at time index k) share interior
// points. Touching boundaries do not count.
bool ellipsoids_overlap(const EllipsoidObstacle& a, const EllipsoidObstacle& b, int k = 0);

// Smallest quadratic form over the field at x (+inf when empty).
double clearance(const ObstacleField& field, const Vec3& x, int k = 0);

}  // namespace freeflyer

#endif  // FREEFLYER_COLLISION_HPP_
