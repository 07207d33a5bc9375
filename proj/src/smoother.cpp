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

#include "freeflyer/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/LU>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"

namespace freeflyer {

namespace {

Vec3 position_of(const Vector& x) { return x.head<3>(); }

// Segment index i with length[i] <= s <= length[i + 1].
int segment_at(const std::vector<double>& length, double s) {
  const auto it = std::upper_bound(length.begin(), length.end(), s);
  int i = static_cast<int>(it - length.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(length.size()) - 2);
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double dd = d.squaredNorm();
  const double t = dd > 0.0 ? std::clamp((p - a).dot(d) / dd, 0.0, 1.0) : 0.0;
  return (p - (a + t * d)).norm();
}

}  // namespace

double configuration_distance(const Vector& a, const Vector& b) {
  const auto nq = a.size() / 2;
  return (a.head(nq) - b.head(nq)).norm();
}

GeometricPath::GeometricPath(std::vector<Vector> states) : states_(std::move(states)) {
  if (states_.size() < 2) throw ContractViolation("GeometricPath needs at least two knots");
  length_.resize(states_.size());
  length_[0] = 0.0;
  for (std::size_t i = 1; i < states_.size(); ++i) {
    length_[i] = length_[i - 1] + configuration_distance(states_[i - 1], states_[i]);
  }
}

GeometricPath GeometricPath::from_trajectory(const Trajectory& traj) {
  std::vector<Vector> s = traj.states;
  if (s.size() == 1) s.push_back(s.front());
  return GeometricPath(std::move(s));
}

Vector GeometricPath::at(double s) const {
  const int i = segment_at(length_, s);
  const double seg = length_[i + 1] - length_[i];
  if (seg <= 0.0) return states_[i];
  const double t = std::clamp((s - length_[i]) / seg, 0.0, 1.0);
  return (1.0 - t) * states_[i] + t * states_[i + 1];
}

Vector GeometricPath::tangent(double s) const {
  int i = segment_at(length_, s);
  // Skip zero-length segments.
  while (i + 2 < knots() && length_[i + 1] - length_[i] <= 0.0) ++i;
  const double seg = length_[i + 1] - length_[i];
  const auto nq = states_[i].size() / 2;
  if (seg <= 0.0) return Vector::Zero(nq);
  return (states_[i + 1].head(nq) - states_[i].head(nq)) / seg;
}

ShortcutResult shortcut(const GeometricPath& path, const ObstacleField& obstacles,
                        const ShortcutConfig& config) {
  if (config.iterations < 0) throw ConfigError("shortcut: iterations must be non-negative");
  if (!(config.knot_spacing > 0.0)) throw ConfigError("shortcut: knot_spacing must be positive");
  const double h_check =
      config.h_check > 0.0 ? config.h_check : obstacles.default_check_resolution();

  ShortcutResult out;
  out.path = path;
  out.length_history.push_back(path.length());
  std::mt19937_64 rng(config.seed);

  for (int it = 0; it < config.iterations; ++it) {
    const GeometricPath& cur = out.path;
    const double L = cur.length();
    std::uniform_real_distribution<double> param(0.0, L);
    double a = param(rng);
    double b = param(rng);
    if (a > b) std::swap(a, b);
    if (!(b - a > 1e-12 * std::max(1.0, L))) continue;

    const Vector xa = cur.at(a);
    const Vector xb = cur.at(b);
    const int pieces = std::max(
        1, static_cast<int>(std::ceil(configuration_distance(xa, xb) / config.knot_spacing)));
    std::vector<Vector> interp;
    for (int j = 0; j <= pieces; ++j) {
      const double t = static_cast<double>(j) / pieces;
      interp.push_back(j == 0 ? xa : j == pieces ? xb : Vector((1.0 - t) * xa + t * xb));
    }
    // Each spliced piece is checked separately.
    bool clear = true;
    for (int j = 0; j < pieces && clear; ++j) {
      clear = segment_clear(obstacles, position_of(interp[j]), position_of(interp[j + 1]),
                            h_check);
    }
    if (!clear) continue;

    // sigma_1, x_a, interpolated knots, x_b, sigma_3.
    std::vector<Vector> spliced;
    const auto& len = cur.cumulative_length();
    int i = 0;
    for (; i < cur.knots() && len[i] < a; ++i) spliced.push_back(cur.states()[i]);
    spliced.insert(spliced.end(), interp.begin(), interp.end());
    while (i < cur.knots() && len[i] <= b) ++i;
    for (; i < cur.knots(); ++i) spliced.push_back(cur.states()[i]);

    GeometricPath candidate(std::move(spliced));
    if (candidate.length() < L - 1e-12 * std::max(1.0, L)) {
      out.path = std::move(candidate);
      ++out.accepted;
      out.length_history.push_back(out.path.length());
    }
  }
  return out;
}

Vec3 angular_velocity_from_rates(const Vec3& euler, const Vec3& rates) {
  Mat3 E;
  for (int i = 0; i < 3; ++i) E.col(i) = euler_rates(euler, Vec3::Unit(i));
  return E.partialPivLu().solve(rates);
}

Trajectory path_reference(const GeometricPath& path, const RetimeConfig& config) {
  if (!(config.h > 0.0) || !(config.v_max > 0.0) || !(config.a_max > 0.0) ||
      config.settle_time < 0.0) {
    throw ConfigError("retime: h, v_max and a_max must be positive, settle_time non-negative");
  }
  const double L = path.length();
  const auto nx = path.states().front().size();
  const auto nq = nx / 2;

  // Quintic rest-to-rest scaling: peak speed 1.875 L/T, peak acceleration
  // 5.7735 L/T^2.
  const double T = std::max(1.875 * L / config.v_max, std::sqrt(5.7735 * L / config.a_max));
  const int moving = L > 0.0 ? static_cast<int>(std::ceil(T / config.h)) : 0;
  const double Tq = moving * config.h;
  const int settle = static_cast<int>(std::ceil(config.settle_time / config.h));

  Trajectory ref;
  ref.h = config.h;
  for (int k = 0; k <= moving + settle; ++k) {
    double s = L, sdot = 0.0;
    if (k < moving) {
      const double tau = k * config.h / Tq;
      const double t2 = tau * tau, t3 = t2 * tau;
      s = L * (10.0 * t3 - 15.0 * t3 * tau + 6.0 * t3 * t2);
      sdot = L / Tq * (30.0 * t2 - 60.0 * t3 + 30.0 * t3 * tau);
    }
    Vector x = path.at(s);
    const Vector qdot = path.tangent(s) * sdot;
    x.tail(nq) = qdot;
    x.segment<3>(nq + 3) = angular_velocity_from_rates(x.segment<3>(3), qdot.segment<3>(3));
    ref.states.push_back(std::move(x));
  }
  const int nu = static_cast<int>(nq);
  ref.controls.assign(ref.states.size() - 1, Vector::Zero(nu));
  return ref;
}

Trajectory retime(const MultibodyModel& model, const GeometricPath& path,
                  const QuadraticCost& cost, const RetimeConfig& config) {
  const Trajectory ref = path_reference(path, config);
  Vector x0 = path.states().front();
  x0.tail(model.nq()).setZero();
  return track(model, ref, cost, x0);
}

double max_path_deviation(const GeometricPath& path, const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& x : traj.states) {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < path.knots(); ++i) {
      d = std::min(d, point_segment_distance(position_of(x), position_of(path.states()[i]),
                                             position_of(path.states()[i + 1])));
    }
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace freeflyer
