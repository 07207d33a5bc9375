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

#include "freeflyer/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Cholesky>

#include "freeflyer/dynamics.hpp"

namespace freeflyer {

namespace {

Vec3 position_of(const Vector& x) { return x.head<3>(); }

// Steering policies depend on the target only through its non-position
// coordinates (the dynamics are translation invariant), so they are cached
// under those coordinates, rounded to 1e-9, and built about the rounded state
// with the position at the origin. Connected rollouts end within the connect
// tolerance of their target, so repeated targets share one policy.
class PolicyCache {
 public:
  PolicyCache(const MultibodyModel& model, const PlannerConfig& config)
      : model_(model), config_(config) {}

  const SteeringPolicy& get(const Vector& target) {
    Vector key = target;
    key.head<3>().setZero();
    for (int i = 3; i < key.size(); ++i) {
      key[i] = std::round(key[i] * 1e9) * 1e-9;
      if (key[i] == 0.0) key[i] = 0.0;  // fold -0
    }
    std::vector<double> k(key.data(), key.data() + key.size());
    auto it = cache_.find(k);
    if (it == cache_.end()) {
      auto p = std::make_unique<SteeringPolicy>(model_, key, config_.steer_cost, config_.h,
                                                config_.max_horizon);
      it = cache_.emplace(std::move(k), std::move(p)).first;
    }
    return *it->second;
  }

 private:
  const MultibodyModel& model_;
  const PlannerConfig& config_;
  std::map<std::vector<double>, std::unique_ptr<SteeringPolicy>> cache_;
};

}  // namespace

PlannerConfig PlannerConfig::for_base(const MultibodyModel& model, const Vector& start,
                                      const Vec3& lo, const Vec3& hi) {
  PlannerConfig c;
  c.lower = start;
  c.upper = start;
  const int nq = model.nq();
  c.lower.tail(nq).setZero();
  c.upper.tail(nq).setZero();
  c.lower.head<3>() = lo;
  c.upper.head<3>() = hi;
  const int nx = model.nx();
  const int nu = model.nu();
  c.steer_cost = QuadraticCost::uniform(Matrix::Identity(nx, nx), 0.1 * Matrix::Identity(nu, nu),
                                        100.0 * Matrix::Identity(nx, nx));
  return c;
}

void PlannerConfig::validate(int nx, int nu) const {
  if (!(gamma > 0.0)) throw ConfigError("planner: gamma must be positive");
  if (max_iterations < 0) throw ConfigError("planner: max_iterations must be non-negative");
  if (lower.size() != nx || upper.size() != nx) {
    throw ConfigError("planner: sample bounds must have one entry per state coordinate");
  }
  for (int i = 0; i < nx; ++i) {
    if (!(lower[i] <= upper[i])) {
      throw ConfigError("planner: empty sample bound for coordinate " + std::to_string(i));
    }
  }
  if (!(v_max > 0.0) || !(h > 0.0)) throw ConfigError("planner: v_max and h must be positive");
  if (min_horizon < 1 || max_horizon < min_horizon) {
    throw ConfigError("planner: need 1 <= min_horizon <= max_horizon");
  }
  if (metric_horizon < 1 || metric_horizon > max_horizon) {
    throw ConfigError("planner: metric_horizon must lie in [1, max_horizon]");
  }
  if (goal_bias < 0.0 || goal_bias > 1.0) throw ConfigError("planner: goal_bias outside [0, 1]");
  if (max_near < 1) throw ConfigError("planner: max_near must be at least 1");
  if (connect_steps < 1) throw ConfigError("planner: connect_steps must be at least 1");
  steer_cost.validate(nx, nu);
}

int PlannerTree::add(const Vector& x, int parent_index, Trajectory edge, double ec) {
  const int id = size();
  nodes.push_back(x);
  parent.push_back(parent_index);
  cost.push_back(parent_index < 0 ? 0.0 : cost[parent_index] + ec);
  edges.push_back(std::move(edge));
  edge_cost.push_back(parent_index < 0 ? 0.0 : ec);
  children.emplace_back();
  if (parent_index >= 0) children[parent_index].push_back(id);
  return id;
}

void PlannerTree::reparent(int node, int new_parent, Trajectory edge, double ec) {
  auto& siblings = children[parent[node]];
  siblings.erase(std::find(siblings.begin(), siblings.end(), node));
  parent[node] = new_parent;
  children[new_parent].push_back(node);
  edges[node] = std::move(edge);
  edge_cost[node] = ec;
  // Depth-first cost update of the subtree.
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    cost[n] = cost[parent[n]] + edge_cost[n];
    for (int c : children[n]) stack.push_back(c);
  }
}

Trajectory PlannerTree::path_to(int node) const {
  std::vector<int> chain;
  for (int n = node; n >= 0; n = parent[n]) chain.push_back(n);
  std::reverse(chain.begin(), chain.end());
  Trajectory out = edges.size() > 1 && chain.size() > 1 ? hold(nodes[0], edges[chain[1]].h)
                                                        : hold(nodes[0], 1.0);
  for (std::size_t i = 1; i < chain.size(); ++i) out.append(edges[chain[i]]);
  return out;
}

double PlannerTree::invariant_violation() const {
  double v = 0.0;
  for (int i = 1; i < size(); ++i) {
    const int p = parent[i];
    if (p < 0 || p >= size()) return std::numeric_limits<double>::infinity();
    const Trajectory& e = edges[i];
    v = std::max(v, (e.front() - nodes[p]).cwiseAbs().maxCoeff());
    v = std::max(v, (e.back() - nodes[i]).cwiseAbs().maxCoeff());
    v = std::max(v, cost[p] - cost[i]);
    v = std::max(v, std::abs(cost[p] + edge_cost[i] - cost[i]));
    if (std::find(children[p].begin(), children[p].end(), i) == children[p].end()) {
      return std::numeric_limits<double>::infinity();
    }
  }
  // Reachability from the root rules out cycles.
  std::vector<int> stack{0};
  int seen = 0;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    ++seen;
    for (int c : children[n]) stack.push_back(c);
    if (seen > size()) break;
  }
  if (size() > 0 && seen != size()) return std::numeric_limits<double>::infinity();
  return v;
}

double QueryMetric::operator()(const Vector& x) const {
  const Vector d = x - target;
  return d.dot(S * d) + d.dot(s) + c;
}

QueryMetric query_metric(const SteeringPolicy& policy, const Vector& target, int horizon) {
  const int k = policy.max_horizon() - horizon;
  return {target, policy.values().S[k], policy.values().s[k], policy.values().c[k]};
}

Vector sample(const PlannerConfig& config, std::mt19937_64& rng) {
  Vector x(config.lower.size());
  for (int i = 0; i < x.size(); ++i) {
    std::uniform_real_distribution<double> d(config.lower[i], config.upper[i]);
    x[i] = config.lower[i] == config.upper[i] ? config.lower[i] : d(rng);
  }
  return x;
}

namespace {

// Metric values of nodes [begin, end) in blocks, as column sums of D o (S D).
void scan_range(const std::vector<Vector>& nodes, const QueryMetric& metric, int begin, int end,
                double* out) {
  constexpr int kBlock = 64;
  const auto nx = metric.target.size();
  Matrix D(nx, kBlock);
  Matrix SD(nx, kBlock);
  for (int b = begin; b < end; b += kBlock) {
    const int w = std::min(kBlock, end - b);
    for (int j = 0; j < w; ++j) D.col(j) = nodes[b + j] - metric.target;
    SD.leftCols(w).noalias() = metric.S * D.leftCols(w);
    for (int j = 0; j < w; ++j) {
      out[b + j] = D.col(j).dot(SD.col(j)) + D.col(j).dot(metric.s) + metric.c;
    }
  }
}

}  // namespace

std::vector<double> metric_scan(const std::vector<Vector>& nodes, const QueryMetric& metric,
                                Execution exec) {
  const int n = static_cast<int>(nodes.size());
  std::vector<double> out(n);
  if (exec == Execution::kParallel) {
    constexpr int kChunk = 512;
    const int chunks = (n + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < chunks; ++c) {
      scan_range(nodes, metric, c * kChunk, std::min(n, (c + 1) * kChunk), out.data());
    }
  } else {
    scan_range(nodes, metric, 0, n, out.data());
  }
  return out;
}

int nearest(const PlannerTree& tree, const QueryMetric& metric, Execution exec) {
  if (tree.size() == 0) throw ContractViolation("nearest: empty tree");
  const std::vector<double> m = metric_scan(tree.nodes, metric, exec);
  int best = 0;
  for (int i = 1; i < static_cast<int>(m.size()); ++i) {
    if (m[i] < m[best]) best = i;
  }
  return best;
}

double near_radius(double gamma, int n, int nx) {
  if (n < 2) return gamma;
  return gamma * std::pow(std::log(static_cast<double>(n)) / n, 1.0 / nx);
}

std::vector<int> near_nodes(const PlannerTree& tree, const QueryMetric& metric, double gamma,
                            Execution exec) {
  const std::vector<double> m = metric_scan(tree.nodes, metric, exec);
  const double radius = near_radius(gamma, tree.size(), static_cast<int>(metric.target.size()));
  std::vector<int> out;
  for (int i = 0; i < tree.size(); ++i) {
    if (m[i] <= radius) out.push_back(i);
  }
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) { return m[a] < m[b]; });
  return out;
}

int steering_horizon(const PlannerConfig& config, const Vector& from, const Vector& to) {
  const double d = (to.head<3>() - from.head<3>()).norm();
  const double steps = std::ceil(d / (config.v_max * config.h));
  return static_cast<int>(
      std::clamp(steps, static_cast<double>(config.min_horizon),
                 static_cast<double>(config.max_horizon)));
}

std::optional<SteerResult> steer_and_connect(const MultibodyModel& model,
                                             const SteeringPolicy& policy, const Vector& from,
                                             const Vector& target, int horizon, int steps,
                                             double tolerance) {
  SteerResult r = policy.steer(model, from, target, horizon);
  Trajectory& t = r.trajectory;
  const int m = std::min(steps, horizon);
  const int nu = model.nu();
  const int nx = model.nx();

  // Reachability map of the last m controls under the target linearization.
  const Matrix& A = policy.discrete().A;
  const Matrix& B = policy.discrete().B;
  Matrix J(nx, m * nu);
  Matrix AkB = B;
  for (int j = m - 1; j >= 0; --j) {
    J.middleCols(j * nu, nu) = AkB;
    AkB = A * AkB;
  }
  const Eigen::LLT<Matrix> gram(J * J.transpose());
  if (gram.info() != Eigen::Success) return std::nullopt;

  const int first = horizon - m;
  Vector err = t.back() - target;
  for (int it = 0; it < 12 && err.cwiseAbs().maxCoeff() > tolerance; ++it) {
    const Vector du = -J.transpose() * gram.solve(err);
    Vector x = t.states[first];
    for (int j = 0; j < m; ++j) {
      t.controls[first + j] += du.segment(j * nu, nu);
      x = rk4_step(model, x, t.controls[first + j], t.h);
      t.states[first + j + 1] = x;
    }
    err = t.back() - target;
  }
  if (!(err.cwiseAbs().maxCoeff() <= tolerance)) return std::nullopt;

  const QuadraticCost& cost = policy.cost();
  r.cost = 0.0;
  for (int k = 0; k < horizon; ++k) {
    r.cost += cost.stage(k, t.states[k] - target, t.controls[k]);
  }
  r.cost += cost.terminal(t.back() - target);
  return r;
}

bool trajectory_clear(const Trajectory& traj, const ObstacleField& field, double h_check) {
  if (traj.empty()) return true;
  if (!point_clear(field, position_of(traj.front()))) return false;
  for (int k = 0; k + 1 < traj.knots(); ++k) {
    if (!segment_clear(field, position_of(traj.states[k]), position_of(traj.states[k + 1]),
                       h_check)) {
      return false;
    }
  }
  return true;
}

PlanResult plan(const MultibodyModel& model, const Vector& start, const Vector& goal,
                const ObstacleField& obstacles, const PlannerConfig& config) {
  const int nx = model.nx();
  config.validate(nx, model.nu());
  if (start.size() != nx || goal.size() != nx) {
    throw ContractViolation("plan: start/goal have wrong dimension");
  }
  const double h_check =
      config.h_check > 0.0 ? config.h_check : obstacles.default_check_resolution();

  PlanResult result;
  PlannerTree& tree = result.tree;
  tree.add(start, -1, Trajectory{}, 0.0);

  if (!point_clear(obstacles, position_of(start))) {
    throw ContractViolation("plan: start state is in collision");
  }
  if (!point_clear(obstacles, position_of(goal))) {
    throw NoPathError("plan: goal lies inside an obstacle",
                      std::make_shared<const PlannerTree>(tree));
  }
  if ((goal - start).cwiseAbs().maxCoeff() == 0.0) {
    result.trajectory = hold(start, config.h);
    return result;
  }

  PolicyCache policies(model, config);
  const QueryMetric goal_metric = query_metric(policies.get(goal), goal, config.metric_horizon);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  // Rewiring can lower the cost of any goal node later on, so all of them are
  // kept and the cheapest is picked at the end.
  std::vector<int> goal_nodes;
  auto consider_goal = [&](int node, int iteration) {
    if (goal_metric(tree.nodes[node]) > config.goal_tolerance) return;
    if (goal_nodes.empty()) result.first_solution_iteration = iteration;
    goal_nodes.push_back(node);
  };

  int it = 0;
  for (; it < config.max_iterations; ++it) {
    if (!goal_nodes.empty() && config.stop_at_first) break;

    // Both draws happen every iteration so the stream does not depend on the
    // outcome of the coin.
    const bool to_goal = coin(rng) < config.goal_bias;
    Vector x_rand = sample(config, rng);
    if (to_goal) x_rand = goal;
    if (!point_clear(obstacles, position_of(x_rand))) continue;

    // Nearest node and the steered extension; x_new is the end of that rollout.
    const SteeringPolicy& rand_policy = policies.get(x_rand);
    const QueryMetric rand_metric = query_metric(rand_policy, x_rand, config.metric_horizon);
    const int i_nearest = nearest(tree, rand_metric);
    const auto first_edge =
        steer_and_connect(model, rand_policy, tree.nodes[i_nearest], x_rand,
                          steering_horizon(config, tree.nodes[i_nearest], x_rand),
                          config.connect_steps, config.connect_tolerance);
    if (!first_edge) continue;
    const Vector x_new = first_edge->trajectory.back();

    // Choose the parent among the near set (plus the nearest node).
    const SteeringPolicy& new_policy = policies.get(x_new);
    const QueryMetric new_metric = query_metric(new_policy, x_new, config.metric_horizon);
    std::vector<int> near = near_nodes(tree, new_metric, config.gamma);
    if (static_cast<int>(near.size()) > config.max_near) near.resize(config.max_near);
    if (near.empty()) near.push_back(i_nearest);

    int parent = -1;
    std::optional<SteerResult> parent_edge;
    auto offer = [&](int candidate, std::optional<SteerResult> edge) {
      if (!edge || !trajectory_clear(edge->trajectory, obstacles, h_check)) return;
      const double c = tree.cost[candidate] + edge->cost;
      if (parent < 0 || c < tree.cost[parent] + parent_edge->cost) {
        parent = candidate;
        parent_edge = std::move(edge);
      }
    };
    std::vector<int> candidates = near;
    if (std::find(candidates.begin(), candidates.end(), i_nearest) == candidates.end()) {
      candidates.push_back(i_nearest);
    }
    std::sort(candidates.begin(), candidates.end());
    for (int c : candidates) {
      if (c == i_nearest) {
        // The extension rollout started here and already ends on x_new.
        offer(c, first_edge);
        continue;
      }
      offer(c, steer_and_connect(model, new_policy, tree.nodes[c], x_new,
                                 steering_horizon(config, tree.nodes[c], x_new),
                                 config.connect_steps, config.connect_tolerance));
    }
    if (parent < 0) continue;
    const int id = tree.add(x_new, parent, parent_edge->trajectory, parent_edge->cost);

    // Rewire: route near nodes through x_new when that is cheaper.
    for (int j : near) {
      if (j == parent || tree.cost[id] >= tree.cost[j]) continue;
      const SteeringPolicy& j_policy = policies.get(tree.nodes[j]);
      auto edge = steer_and_connect(model, j_policy, x_new, tree.nodes[j],
                                    steering_horizon(config, x_new, tree.nodes[j]),
                                    config.connect_steps, config.connect_tolerance);
      if (!edge || !trajectory_clear(edge->trajectory, obstacles, h_check)) continue;
      if (tree.cost[id] + edge->cost < tree.cost[j]) {
        tree.reparent(j, id, std::move(edge->trajectory), edge->cost);
      }
    }
    consider_goal(id, it);
  }
  result.iterations = it;

  if (goal_nodes.empty()) {
    throw NoPathError("plan: no path to the goal within " + std::to_string(config.max_iterations) +
                          " iterations",
                      std::make_shared<const PlannerTree>(tree));
  }
  int best_goal = goal_nodes.front();
  for (int g : goal_nodes) {
    if (tree.cost[g] < tree.cost[best_goal]) best_goal = g;
  }
  result.goal_node = best_goal;
  result.trajectory = tree.path_to(best_goal);
  result.cost = tree.cost[best_goal];
  return result;
}

}  // namespace freeflyer
