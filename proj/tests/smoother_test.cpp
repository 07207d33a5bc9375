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

#include <cmath>

#include <gtest/gtest.h>

#include "freeflyer/errors.hpp"
#include "freeflyer/harness.hpp"
#include "oracles.hpp"

namespace freeflyer {
namespace {

Vector at(int nx, double x, double y, double z) {
  Vector s = Vector::Zero(nx);
  s.head<3>() << x, y, z;
  return s;
}

constexpr int kNx = 16;

// Polyline length in position coordinates, computed from the knots alone.
double polyline_length(const std::vector<Vector>& states) {
  double l = 0.0;
  for (std::size_t i = 1; i < states.size(); ++i) {
    l += (states[i].head<8>() - states[i - 1].head<8>()).norm();
  }
  return l;
}

GeometricPath gamma_detour() {
  return GeometricPath({at(kNx, 0, 0, 0), at(kNx, 0, 2, 0), at(kNx, 2, 2, 0)});
}

TEST(GeometricPathTest, CumulativeLength) {
  const GeometricPath p = gamma_detour();
  EXPECT_DOUBLE_EQ(p.length(), 4.0);
  EXPECT_DOUBLE_EQ(p.cumulative_length()[1], 2.0);
  EXPECT_EQ(p.at(3.0), at(kNx, 1, 2, 0));
  EXPECT_EQ(p.at(0.0), at(kNx, 0, 0, 0));
  EXPECT_EQ(p.at(4.0), at(kNx, 2, 2, 0));
  EXPECT_THROW(GeometricPath({at(kNx, 0, 0, 0)}), ContractViolation);
}

TEST(ShortcutTest, StraightPathKeepsLength) {
  const GeometricPath p({at(kNx, 0, 0, 0), at(kNx, 1, 0, 0), at(kNx, 2, 0, 0), at(kNx, 3, 0, 0)});
  const ShortcutResult r = shortcut(p, ObstacleField{}, ShortcutConfig{});
  EXPECT_NEAR(r.path.length(), 3.0, 1e-9);
  EXPECT_EQ(r.path.states().front(), p.states().front());
  EXPECT_EQ(r.path.states().back(), p.states().back());
}

TEST(ShortcutTest, DetourConvergesToStraightLine) {
  ShortcutConfig c;
  c.iterations = 300;
  const ShortcutResult r = shortcut(gamma_detour(), ObstacleField{}, c);
  const double straight = std::sqrt(8.0);
  EXPECT_LT(r.path.length(), 1.01 * straight);
  EXPECT_GE(r.path.length(), straight - 1e-12);
  EXPECT_NEAR(polyline_length(r.path.states()), r.path.length(), 1e-9);
}

TEST(ShortcutTest, BlockedDetourStaysClear) {
  ObstacleField f;
  f.add(EllipsoidObstacle::with_semi_axes(Vec3(1, 1, 0), Vec3(0.4, 0.4, 0.4)));
  const GeometricPath input = gamma_detour();
  ShortcutConfig c;
  c.iterations = 300;
  c.seed = 5;
  const double h_check = f.default_check_resolution();

  // Replay the accepted iterates by stepping the budget one at a time.
  double previous = input.length();
  int accepted = 0;
  for (int n = 1; n <= c.iterations; n += 7) {
    ShortcutConfig step = c;
    step.iterations = n;
    const ShortcutResult r = shortcut(input, f, step);
    const auto& s = r.path.states();
    for (std::size_t i = 1; i < s.size(); ++i) {
      ASSERT_TRUE(segment_clear(f, s[i - 1].head<3>(), s[i].head<3>(), h_check))
          << "iteration budget " << n << " segment " << i;
    }
    EXPECT_EQ(s.front(), input.states().front());
    EXPECT_EQ(s.back(), input.states().back());
    EXPECT_LE(r.path.length(), previous);
    previous = r.path.length();
    accepted = r.accepted;
  }
  EXPECT_GT(accepted, 0);
  EXPECT_LT(previous, input.length());
  EXPECT_GT(previous, std::sqrt(8.0) + 0.01);
}

TEST(ShortcutTest, LengthHistoryIsMonotone) {
  ObstacleField f;
  f.add(EllipsoidObstacle::with_semi_axes(Vec3(1, 1, 0), Vec3(0.4, 0.4, 0.4)));
  ShortcutConfig c;
  c.iterations = 300;
  const ShortcutResult r = shortcut(gamma_detour(), f, c);
  ASSERT_EQ(static_cast<int>(r.length_history.size()), r.accepted + 1);
  EXPECT_EQ(r.length_history.front(), 4.0);
  for (std::size_t i = 1; i < r.length_history.size(); ++i) {
    EXPECT_LE(r.length_history[i], r.length_history[i - 1]);
  }
  EXPECT_EQ(r.length_history.back(), r.path.length());
}

TEST(ShortcutTest, DeterministicUnderSeed) {
  ObstacleField f;
  f.add(EllipsoidObstacle::with_semi_axes(Vec3(1, 1, 0), Vec3(0.4, 0.4, 0.4)));
  ShortcutConfig c;
  c.seed = 17;
  const ShortcutResult a = shortcut(gamma_detour(), f, c);
  const ShortcutResult b = shortcut(gamma_detour(), f, c);
  ASSERT_EQ(a.path.knots(), b.path.knots());
  for (int i = 0; i < a.path.knots(); ++i) EXPECT_EQ(a.path.states()[i], b.path.states()[i]);
}

TEST(ShortcutTest, RejectsBadConfig) {
  ShortcutConfig c;
  c.iterations = -1;
  EXPECT_THROW(shortcut(gamma_detour(), ObstacleField{}, c), ConfigError);
}

class RetimeTest : public ::testing::Test {
 protected:
  MultibodyModel model_ = oracle::astrobee_model();
  QuadraticCost cost_ = DiagonalWeights{}.cost(model_.nq(), model_.nu());
  RetimeConfig config_;
};

TEST_F(RetimeTest, RestToRest) {
  const GeometricPath p({at(kNx, 0, 0, 0), at(kNx, 1, 0.5, 0)});
  const Trajectory t = retime(model_, p, cost_, config_);
  EXPECT_LT(t.states.front().tail(model_.nq()).norm(), 1e-3);
  EXPECT_LT(t.states.back().tail(model_.nq()).norm(), 1e-3);
  EXPECT_LT((t.states.back().head<3>() - Vec3(1, 0.5, 0)).norm(), 1e-3);
}

TEST_F(RetimeTest, ReplayReproducesStates) {
  const Trajectory t = retime(model_, gamma_detour(), cost_, config_);
  EXPECT_LT(replay_error(model_, t), 1e-9);
  for (int k = 0; k + 1 < t.knots(); ++k) {
    const Vector next = rk4_step(model_, t.states[k], t.controls[k], t.h);
    ASSERT_LT((next - t.states[k + 1]).cwiseAbs().maxCoeff(), 1e-9) << "knot " << k;
  }
}

TEST_F(RetimeTest, DeviationWithinTrackingBound) {
  const double tracking_bound = 0.05;
  ObstacleField f;
  f.add(EllipsoidObstacle::with_semi_axes(Vec3(1, 1, 0), Vec3(0.4, 0.4, 0.4)));
  const GeometricPath p = shortcut(gamma_detour(), f, ShortcutConfig{}).path;
  const Trajectory t = retime(model_, p, cost_, config_);
  EXPECT_LT(max_path_deviation(p, t), tracking_bound);
}

TEST_F(RetimeTest, RoundTripOfFeasibleTrajectory) {
  const Trajectory first = retime(model_, gamma_detour(), cost_, config_);
  const GeometricPath feasible = GeometricPath::from_trajectory(first);
  const Trajectory second = retime(model_, feasible, cost_, config_);
  double sum = 0.0;
  for (const auto& x : second.states) {
    const double d = max_path_deviation(feasible, Trajectory{first.h, {x}, {}});
    sum += d * d;
  }
  const double rms = std::sqrt(sum / second.knots());
  EXPECT_LT(rms, 0.01 * feasible.length());
  EXPECT_LT((second.states.back().head<3>() - first.states.back().head<3>()).norm(), 1e-2);
}

TEST_F(RetimeTest, ReferenceRespectsSpeedLimit) {
  const Trajectory ref = path_reference(gamma_detour(), config_);
  for (const auto& x : ref.states) EXPECT_LE(x.segment<3>(8).norm(), config_.v_max * 1.0001);
  EXPECT_EQ(ref.states.front().head<3>(), Vec3::Zero());
  EXPECT_EQ(ref.states.back().head<3>(), Vec3(2, 2, 0));
}

TEST_F(RetimeTest, RejectsBadConfig) {
  RetimeConfig c = config_;
  c.h = 0.0;
  EXPECT_THROW(retime(model_, gamma_detour(), cost_, c), ConfigError);
}

}  // namespace
}  // namespace freeflyer
