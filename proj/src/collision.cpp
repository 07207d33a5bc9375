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

#include "freeflyer/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "freeflyer/errors.hpp"

namespace freeflyer {

EllipsoidObstacle::EllipsoidObstacle(const Vec3& center, const Mat3& shape,
                                     double safety_factor, std::string name)
    : EllipsoidObstacle(std::vector<Vec3>{center}, shape, safety_factor, std::move(name)) {}

EllipsoidObstacle::EllipsoidObstacle(std::vector<Vec3> centers, const Mat3& shape,
                                     double safety_factor, std::string name)
    : centers_(std::move(centers)), shape_(shape), safety_(safety_factor), name_(std::move(name)) {
  if (centers_.empty()) throw ValidationError("obstacle '" + name_ + "' has no centre");
  if (!(safety_ >= 1.0)) {
    throw ValidationError("obstacle '" + name_ + "' safety factor must be >= 1");
  }
  if ((shape_ - shape_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * shape_.cwiseAbs().maxCoeff()) {
    throw ValidationError("obstacle '" + name_ + "' shape matrix is not symmetric");
  }
  Eigen::LLT<Mat3> llt(shape_);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("obstacle '" + name_ + "' shape matrix is not positive definite");
  }
  effective_ = shape_ / (safety_ * safety_);
  const double lmax = Eigen::SelfAdjointEigenSolver<Mat3>(shape_).eigenvalues().maxCoeff();
  min_semi_axis_ = safety_ / std::sqrt(lmax);
}

EllipsoidObstacle EllipsoidObstacle::with_semi_axes(const Vec3& center, const Vec3& semi_axes,
                                                    double safety_factor, std::string name) {
  const Vec3 d = semi_axes.cwiseProduct(semi_axes).cwiseInverse();
  return EllipsoidObstacle(center, Mat3(d.asDiagonal()), safety_factor, std::move(name));
}

const Vec3& EllipsoidObstacle::center(int k) const {
  const int last = static_cast<int>(centers_.size()) - 1;
  return centers_[std::clamp(k, 0, last)];
}

double EllipsoidObstacle::quadratic_form(const Vec3& x, int k) const {
  const Vec3 d = x - center(k);
  return d.dot(effective_ * d);
}

EllipsoidObstacle EllipsoidObstacle::inflated(double factor) const {
  return EllipsoidObstacle(centers_, shape_, safety_ * factor, name_);
}

ObstacleField ObstacleField::inflated(double factor) const {
  ObstacleField out;
  for (const auto& o : obstacles) out.add(o.inflated(factor));
  return out;
}

double ObstacleField::default_check_resolution() const {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) r = std::min(r, 0.5 * o.min_semi_axis());
  return r;
}

bool point_clear(const EllipsoidObstacle& obs, const Vec3& x, int k) {
  return obs.quadratic_form(x, k) >= 1.0;
}

bool point_clear(const ObstacleField& field, const Vec3& x, int k) {
  for (const auto& o : field.obstacles) {
    if (!point_clear(o, x, k)) return false;
  }
  return true;
}

int segment_subdivisions(double length, double h_check) {
  int n = 1;
  while (n < (1 << 24) && length / n > h_check) n *= 2;
  return n;
}

bool segment_clear(const ObstacleField& field, const Vec3& xa, const Vec3& xb, double h_check,
                   int k, bool strict) {
  if (!(h_check > 0.0)) throw ContractViolation("segment_clear: h_check must be positive");
  if (strict && h_check > field.default_check_resolution()) {
    throw ConfigError("segment_clear: h_check " + std::to_string(h_check) +
                      " exceeds half the smallest obstacle semi-axis " +
                      std::to_string(field.default_check_resolution()));
  }
  if (field.empty()) return true;
  const int n = segment_subdivisions((xb - xa).norm(), h_check);
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    if (!point_clear(field, xa + t * (xb - xa), k)) return false;
  }
  return true;
}

Vector trajectory_constraint(const std::vector<Vec3>& positions, const ObstacleField& field,
                             int k0, Execution exec) {
  const int n = static_cast<int>(positions.size());
  const int m = field.size();
  Vector out(static_cast<Eigen::Index>(n) * m);
  if (exec == Execution::kParallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        out[i * n + j] = 1.0 - field.obstacles[i].quadratic_form(positions[j], k0 + j);
      }
    }
  } else {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        out[i * n + j] = 1.0 - field.obstacles[i].quadratic_form(positions[j], k0 + j);
      }
    }
  }
  return out;
}

bool ellipsoids_overlap(const EllipsoidObstacle& a, const EllipsoidObstacle& b, int k) {
  const Vec3 d = b.center(k) - a.center(k);
  const Mat3 Sa = a.effective_shape().inverse();
  const Mat3 Sb = b.effective_shape().inverse();
  // K(s) = 1 - d'[Sa/(1-s) + Sb/s]^-1 d is convex on (0, 1) and negative
  // somewhere exactly when the ellipsoids are disjoint.
  auto K = [&](double s) {
    const Mat3 M = Sa / (1.0 - s) + Sb / s;
    return 1.0 - d.dot(M.llt().solve(d));
  };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double k1 = K(x1), k2 = K(x2);
  for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
    if (k1 < k2) {
      hi = x2;
      x2 = x1;
      k2 = k1;
      x1 = hi - phi * (hi - lo);
      k1 = K(x1);
    } else {
      lo = x1;
      x1 = x2;
      k1 = k2;
      x2 = lo + phi * (hi - lo);
      k2 = K(x2);
    }
  }
  return std::min(k1, k2) > 1e-12;
}

double clearance(const ObstacleField& field, const Vec3& x, int k) {
  double c = std::numeric_limits<double>::infinity();
  for (const auto& o : field.obstacles) c = std::min(c, o.quadratic_form(x, k));
  return c;
}

}  // namespace freeflyer
