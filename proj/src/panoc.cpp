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

#include "freeflyer/panoc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "freeflyer/errors.hpp"

namespace freeflyer {

namespace {

class Lbfgs {
 public:
  explicit Lbfgs(int memory) : memory_(memory) {}

  void reset() {
    s_.clear();
    y_.clear();
  }
  int size() const { return static_cast<int>(s_.size()); }

  void push(const Vector& s, const Vector& y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12 * s.squaredNorm())) return;
    s_.push_back(s);
    y_.push_back(y);
    if (size() > memory_) {
      s_.pop_front();
      y_.pop_front();
    }
  }

  // -H R by the two-loop recursion; -gamma R without memory.
  Vector direction(const Vector& r, double gamma) const {
    if (s_.empty()) return -gamma * r;
    const int m = size();
    std::vector<double> alpha(m);
    Vector q = r;
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = s_[i].dot(q) / s_[i].dot(y_[i]);
      q -= alpha[i] * y_[i];
    }
    q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
    for (int i = 0; i < m; ++i) {
      const double beta = y_[i].dot(q) / s_[i].dot(y_[i]);
      q += (alpha[i] - beta) * s_[i];
    }
    return -q;
  }

 private:
  int memory_;
  std::deque<Vector> s_;
  std::deque<Vector> y_;
};

struct Point {
  Vector u;
  double f = 0.0;
  Vector g;
};

}  // namespace

BoxSet BoxSet::unbounded(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
}

BoxSet BoxSet::uniform(int n, double lo, double hi) {
  return {Vector::Constant(n, lo), Vector::Constant(n, hi)};
}

Vector BoxSet::project(const Vector& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

void BoxSet::validate() const {
  if (lower.size() != upper.size()) throw ConfigError("box bounds have different sizes");
  for (int i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw ConfigError("box bound " + std::to_string(i) + " has lower > upper");
    }
  }
}

std::string to_string(SolverStatus s) {
  return s == SolverStatus::kConverged ? "converged" : "max_iterations";
}

bool SolverState::envelope_monotone() const {
  for (std::size_t i = 0; i < envelope_before.size(); ++i) {
    const double tol = 1e-12 * std::max(1.0, std::abs(envelope_before[i]));
    if (envelope_after[i] > envelope_before[i] + tol) return false;
  }
  return true;
}

SolverState panoc_solve(const CostFunction& f, const BoxSet& set, const Vector& u0,
                        const PanocConfig& config) {
  set.validate();
  if (u0.size() != set.size()) throw ContractViolation("panoc_solve: u0 and box differ in size");
  if (!u0.allFinite()) throw ContractViolation("panoc_solve: u0 is not finite");
  if (!(config.tolerance > 0.0) || config.max_iterations < 0 || config.memory < 0 ||
      !(config.gamma_factor > 0.0 && config.gamma_factor < 1.0)) {
    throw ConfigError("panoc_solve: invalid configuration");
  }

  SolverState st;
  auto eval = [&](const Vector& u) {
    Point p;
    p.u = u;
    p.f = f(u, &p.g);
    ++st.cost_evaluations;
    return p;
  };
  auto value = [&](const Vector& u) {
    ++st.cost_evaluations;
    return f(u, nullptr);
  };

  Point x = eval(u0);

  // Two-point Lipschitz estimate.
  {
    Vector d = (1e-6 * x.u.cwiseAbs()).cwiseMax(1e-6);
    const Point y = eval(x.u + d);
    st.lipschitz = std::max((y.g - x.g).norm() / d.norm(), 1e-8);
  }
  st.gamma = config.gamma_factor / st.lipschitz;

  Lbfgs lbfgs(config.memory);
  Vector ubar, r;
  double fbar = 0.0;
  auto forward_backward = [&]() {
    ubar = set.project(x.u - st.gamma * x.g);
    r = x.u - ubar;
    fbar = value(ubar);
  };
  forward_backward();

  for (;;) {
    // Backtrack on L until the quadratic upper bound holds at ubar.
    for (int guard = 0; guard < 60; ++guard) {
      const double bound = x.f - x.g.dot(r) + 0.5 * st.lipschitz * r.squaredNorm();
      if (fbar <= bound + 1e-12 * (1.0 + std::abs(x.f))) break;
      st.lipschitz *= 2.0;
      st.gamma = config.gamma_factor / st.lipschitz;
      lbfgs.reset();
      forward_backward();
    }

    st.residual = r.norm() / st.gamma;
    if (st.residual <= config.tolerance) {
      st.status = SolverStatus::kConverged;
      break;
    }
    if (st.iterations >= config.max_iterations) break;

    const double gamma = st.gamma;
    const Vector R = r / gamma;
    const double phi = x.f - x.g.dot(r) + r.squaredNorm() / (2.0 * gamma);
    const double sigma =
        config.sufficient_decrease * gamma * (1.0 - gamma * st.lipschitz) / 2.0;
    const Vector d = lbfgs.direction(R, gamma);

    Point next;
    Vector next_ubar, next_r;
    double next_phi = 0.0;
    bool accepted = false;
    double tau = 1.0;
    for (int ls = 0; ls <= config.max_line_search; ++ls, tau *= 0.5) {
      next = eval(x.u - (1.0 - tau) * r + tau * d);
      if (!std::isfinite(next.f) || !next.g.allFinite()) continue;
      next_ubar = set.project(next.u - gamma * next.g);
      next_r = next.u - next_ubar;
      next_phi = next.f - next.g.dot(next_r) + next_r.squaredNorm() / (2.0 * gamma);
      if (next_phi <= phi - sigma * R.squaredNorm()) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Plain forward-backward step.
      ++st.fallback_steps;
      next = eval(ubar);
      next_ubar = set.project(next.u - gamma * next.g);
      next_r = next.u - next_ubar;
      next_phi = next.f - next.g.dot(next_r) + next_r.squaredNorm() / (2.0 * gamma);
    }
    st.envelope_before.push_back(phi);
    st.envelope_after.push_back(next_phi);

    lbfgs.push(next.u - x.u, next_r / gamma - R);
    x = std::move(next);
    ubar = std::move(next_ubar);
    r = std::move(next_r);
    fbar = value(ubar);
    ++st.iterations;
  }

  st.u = x.u;
  st.cost = x.f;
  st.memory_pairs = lbfgs.size();
  return st;
}

}  // namespace freeflyer
