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

#include "freeflyer/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"

namespace freeflyer {

Vector Trajectory::control_or_zero(int k, int nu) const {
  if (k < steps()) return controls[k];
  return Vector::Zero(nu);
}

void Trajectory::append(const Trajectory& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (std::abs(other.h - h) > 1e-12) {
    throw ContractViolation("Trajectory::append: step sizes differ");
  }
  states.insert(states.end(), other.states.begin() + 1, other.states.end());
  controls.insert(controls.end(), other.controls.begin(), other.controls.end());
}

void Trajectory::check(int nx, int nu) const {
  if (!(h > 0.0)) throw ContractViolation("trajectory step must be positive");
  if (empty()) throw ContractViolation("trajectory has no knots");
  if (steps() != knots() - 1) {
    throw ContractViolation("trajectory needs exactly one control per step");
  }
  for (const auto& x : states) {
    if (x.size() != nx) throw ContractViolation("trajectory state has wrong dimension");
  }
  for (const auto& u : controls) {
    if (u.size() != nu) throw ContractViolation("trajectory control has wrong dimension");
  }
}

double replay_error(const MultibodyModel& model, const Trajectory& traj) {
  if (traj.empty()) return 0.0;
  double err = 0.0;
  for (int k = 0; k < traj.steps(); ++k) {
    const Vector x = rk4_step(model, traj.states[k], traj.controls[k], traj.h);
    err = std::max(err, (x - traj.states[k + 1]).cwiseAbs().maxCoeff());
  }
  return err;
}

Trajectory hold(const Vector& x, double h) {
  Trajectory t;
  t.h = h;
  t.states.push_back(x);
  return t;
}

std::string trajectory_csv_header(int nx, int nu) {
  std::string s = "t";
  for (int i = 0; i < nx; ++i) s += ",x" + std::to_string(i);
  for (int i = 0; i < nu; ++i) s += ",u" + std::to_string(i);
  return s + "\n";
}

std::string trajectory_to_csv(const Trajectory& traj, int nu) {
  const int nx = traj.empty() ? 2 * nu : static_cast<int>(traj.front().size());
  std::string out = trajectory_csv_header(nx, nu);
  char buf[40];
  for (int k = 0; k < traj.knots(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.time(k));
    out += buf;
    for (int i = 0; i < nx; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", traj.states[k][i]);
      out += buf;
    }
    const Vector u = traj.control_or_zero(k, nu);
    for (int i = 0; i < nu; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", u[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_csv(const std::string& text, int nx, int nu) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Trajectory traj;
  std::vector<double> times;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == 't' || line[0] == '#') continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("trajectory: bad number '" + cell + "'", lineno, "row");
      }
    }
    if (static_cast<int>(row.size()) != 1 + nx + nu) {
      throw ParseError("trajectory: expected " + std::to_string(1 + nx + nu) + " columns, got " +
                           std::to_string(row.size()),
                       lineno, "row");
    }
    times.push_back(row[0]);
    traj.states.push_back(Eigen::Map<const Vector>(row.data() + 1, nx));
    traj.controls.push_back(Eigen::Map<const Vector>(row.data() + 1 + nx, nu));
  }
  if (!traj.states.empty()) traj.controls.pop_back();
  if (times.size() >= 2) traj.h = times[1] - times[0];
  return traj;
}

}  // namespace freeflyer
