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

#ifndef FREEFLYER_PANOC_HPP_
#define FREEFLYER_PANOC_HPP_

#include <functional>
#include <string>
#include <vector>

#include "freeflyer/robot.hpp"

namespace freeflyer {

// Closed box {lo <= u <= hi}; infinite bounds are allowed.
struct BoxSet {
  Vector lower;
  Vector upper;

  static BoxSet unbounded(int n);
  static BoxSet uniform(int n, double lo, double hi);
  int size() const { return static_cast<int>(lower.size()); }
  Vector project(const Vector& u) const;
  void validate() const;
};

// Smooth cost. When `grad` is non-null it receives the gradient.
using CostFunction = std::function<double(const Vector& u, Vector* grad)>;

struct PanocConfig {
  double tolerance = 1e-6;     // on |u - proj(u - gamma grad)| / gamma
  int max_iterations = 500;
  int memory = 10;             // L-BFGS pairs
  int max_line_search = 20;    // tau halvings before the plain forward-backward step
  double gamma_factor = 0.95;  // gamma = gamma_factor / L
  double sufficient_decrease = 0.5;
};

enum class SolverStatus { kConverged, kMaxIterations };

std::string to_string(SolverStatus s);

struct SolverState {
  Vector u;                     // returned iterate
  double lipschitz = 0.0;       // current estimate of L
  double gamma = 0.0;           // step gamma_factor / L
  double residual = 0.0;        // fixed-point residual at u
  double cost = 0.0;
  int iterations = 0;           // accepted steps
  int cost_evaluations = 0;
  int fallback_steps = 0;       // steps where the line search gave up
  int memory_pairs = 0;
  SolverStatus status = SolverStatus::kMaxIterations;
  // Envelope before and after every accepted step, evaluated at that step's
  // gamma.
  std::vector<double> envelope_before;
  std::vector<double> envelope_after;
  bool envelope_monotone() const;
};

// Forward-backward steps on f + indicator(box) safeguarded by L-BFGS
// directions accepted under a decrease condition on the forward-backward
// envelope. Returns the best iterate with status kMaxIterations when the
// budget runs out.
SolverState panoc_solve(const CostFunction& f, const BoxSet& set, const Vector& u0,
                        const PanocConfig& config);

}  // namespace freeflyer

#endif  // FREEFLYER_PANOC_HPP_
