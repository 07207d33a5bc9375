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

#ifndef FREEFLYER_PLANNER_HPP_
#define FREEFLYER_PLANNER_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "freeflyer/collision.hpp"
#include "freeflyer/errors.hpp"
#include "freeflyer/execution.hpp"
#include "freeflyer/lqr.hpp"
#include "freeflyer/robot.hpp"
#include "freeflyer/trajectory.hpp"

namespace freeflyer {

struct PlannerConfig {
  double gamma = 40.0;            // near-ball constant, metric units
  int max_iterations = 1500;
  double goal_tolerance = 1e-6;   // metric units
  Vector lower;                   // per state coordinate
  Vector upper;
  std::uint64_t seed = 1;
  QuadraticCost steer_cost;
  double v_max = 0.25;            // m/s, sets the steering horizon
  double h = 0.5;                 // s
  int min_horizon = 10;
  int max_horizon = 200;
  int metric_horizon = 10;        // steps of the Riccati pass behind the metric
  double goal_bias = 0.05;        // probability of sampling the goal itself
  bool stop_at_first = true;      // otherwise run the full budget, keep the best
  int max_near = 8;               // cap on rewiring candidates
  double h_check = 0.0;           // <= 0 picks the field's default resolution
  int connect_steps = 4;          // trailing controls adjusted to land on target
  double connect_tolerance = 1e-10;

  // Bounds holding velocities at zero and the attitude and arm at `start`,
  // with the base position free inside [lo, hi].
  static PlannerConfig for_base(const MultibodyModel& model, const Vector& start,
                                const Vec3& lo, const Vec3& hi);
  void validate(int nx, int nu) const;
};

struct PlannerTree {
  std::vector<Vector> nodes;
  std::vector<int> parent;            // -1 at the root
  std::vector<double> cost;           // arrival cost from the root
  std::vector<Trajectory> edges;      // edge into each node; empty at the root
  std::vector<double> edge_cost;
  std::vector<std::vector<int>> children;

  int size() const { return static_cast<int>(nodes.size()); }
  int add(const Vector& x, int parent_index, Trajectory edge, double edge_cost);
  // Moves `node` under `new_parent` and shifts the costs of its subtree.
  void reparent(int node, int new_parent, Trajectory edge, double edge_cost);
  // Root-to-node trajectory.
  Trajectory path_to(int node) const;
  // Largest violation of the tree invariants (endpoint mismatch, cost
  // ordering, parent/child consistency). Zero for a healthy tree.
  double invariant_violation() const;
};

class NoPathError : public Error {
 public:
  NoPathError(const std::string& what, std::shared_ptr<const PlannerTree> tree)
      : Error(what), tree_(std::move(tree)) {}
  const PlannerTree* tree() const { return tree_.get(); }

 private:
  std::shared_ptr<const PlannerTree> tree_;
};

// (x' - t)' S (x' - t) + (x' - t)' s + c with (S, s, c) from a Riccati pass
// linearized about the query point t.
struct QueryMetric {
  Vector target;
  Matrix S;
  Vector s;
  double c = 0.0;

  double operator()(const Vector& x) const;
};

QueryMetric query_metric(const SteeringPolicy& policy, const Vector& target, int horizon);

Vector sample(const PlannerConfig& config, std::mt19937_64& rng);

// Metric value of every node, in node order.
std::vector<double> metric_scan(const std::vector<Vector>& nodes, const QueryMetric& metric,
                                Execution exec = Execution::kParallel);

// argmin of the metric over the tree; ties go to the lowest index.
int nearest(const PlannerTree& tree, const QueryMetric& metric,
            Execution exec = Execution::kParallel);

// Nodes whose metric is within gamma (log n / n)^(1/n_x), ascending by
// metric then index. Empty when nothing is inside the ball.
std::vector<int> near_nodes(const PlannerTree& tree, const QueryMetric& metric, double gamma,
                            Execution exec = Execution::kParallel);

double near_radius(double gamma, int n, int nx);

// Steering horizon ceil(|dp| / (v_max h)) clamped to [min, max].
int steering_horizon(const PlannerConfig& config, const Vector& from, const Vector& to);

// LQR steering followed by a Newton correction of the last `steps` controls
// so that the rollout ends on `target`. Empty when the correction does not
// reach `tolerance`.
std::optional<SteerResult> steer_and_connect(const MultibodyModel& model,
                                             const SteeringPolicy& policy, const Vector& from,
                                             const Vector& target, int horizon, int steps,
                                             double tolerance);

struct PlanResult {
  Trajectory trajectory;
  double cost = 0.0;
  PlannerTree tree;
  int goal_node = 0;
  int iterations = 0;
  int first_solution_iteration = -1;
};

// LQR-RRT*. Throws NoPathError (carrying the tree) when the goal is inside an
// obstacle or the budget runs out, and ContractViolation when the start is in
// collision.
PlanResult plan(const MultibodyModel& model, const Vector& start, const Vector& goal,
                const ObstacleField& obstacles, const PlannerConfig& config);

// Collision check of consecutive knot positions.
bool trajectory_clear(const Trajectory& traj, const ObstacleField& field, double h_check);

}  // namespace freeflyer

#endif  // FREEFLYER_PLANNER_HPP_
