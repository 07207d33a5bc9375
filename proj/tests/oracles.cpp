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

#include "oracles.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <unsupported/Eigen/MatrixFunctions>

namespace freeflyer::oracle {

MultibodyModel astrobee_model(double link_length) {
  return MultibodyModel(RobotDescription::astrobee(link_length));
}

MultibodyModel free_base_model() {
  RobotDescription d;
  d.base = "base";
  d.bodies.push_back({"base", 7.0, Mat3::Identity() * 0.11, Vec3::Zero()});
  return MultibodyModel(d);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vector random_vector(int n, std::mt19937_64& rng, double scale) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(rng, -scale, scale);
  return v;
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = uniform(rng, -scale, scale);
  }
  return m;
}

Matrix random_spd(int n, std::mt19937_64& rng, double lo, double hi) {
  const Eigen::HouseholderQR<Matrix> qr(random_matrix(n, n, rng));
  const Matrix Qm = qr.householderQ();
  Vector eig(n);
  for (int i = 0; i < n; ++i) eig[i] = uniform(rng, lo, hi);
  Matrix S = Qm * eig.asDiagonal() * Qm.transpose();
  return 0.5 * (S + S.transpose());
}

Matrix random_stable(int n, std::mt19937_64& rng) {
  // Real Schur-like construction: block-diagonal spirals and decays, rotated.
  Matrix D = Matrix::Zero(n, n);
  int i = 0;
  while (i < n) {
    const double re = uniform(rng, -2.0, -0.1);
    if (i + 1 < n && uniform(rng, 0.0, 1.0) < 0.5) {
      const double im = uniform(rng, 0.2, 3.0);
      D(i, i) = re;
      D(i + 1, i + 1) = re;
      D(i, i + 1) = im;
      D(i + 1, i) = -im;
      i += 2;
    } else {
      D(i, i) = re;
      i += 1;
    }
  }
  const Eigen::HouseholderQR<Matrix> qr(random_matrix(n, n, rng));
  const Matrix Qm = qr.householderQ();
  return Qm * D * Qm.transpose();
}

Vector random_state(const MultibodyModel& model, std::mt19937_64& rng, double vel) {
  const int nj = model.num_joints();
  Vector x(model.nx());
  x.head<3>() = random_vector(3, rng, 1.0);
  x[3] = uniform(rng, -3.0, 3.0);
  x[4] = uniform(rng, -1.0, 1.0);
  x[5] = uniform(rng, -3.0, 3.0);
  x.segment(6, nj) = random_vector(nj, rng, 1.0);
  x.tail(model.nq()) = random_vector(model.nq(), rng, vel);
  return x;
}

Matrix expm(const Matrix& A) { return A.exp(); }

namespace {

Mat3 rotation_zyx(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy[2], Vec3::UnitZ()) * Eigen::AngleAxisd(rpy[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy[0], Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 vee(const Mat3& W) {
  const Mat3 S = 0.5 * (W - W.transpose());
  return Vec3(S(2, 1), S(0, 2), S(1, 0));
}

// Rates of the configuration coordinates implied by the velocity half of x.
Vector configuration_rates(const MultibodyModel& model, const Vector& x) {
  const int nq = model.nq();
  const Vec3 rpy = x.segment<3>(3);
  const Vec3 omega = x.segment<3>(nq + 3);
  const double d = 1e-5;
  const Mat3 R = rotation_zyx(rpy);
  Mat3 W;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = d;
    W.col(j) = vee((rotation_zyx(rpy + e) - rotation_zyx(rpy - e)) / (2.0 * d) * R.transpose());
  }
  Vector c(nq);
  c.head<3>() = x.segment<3>(nq);
  c.segment<3>(3) = W.lu().solve(omega);
  c.tail(nq - 6) = x.tail(nq - 6);
  return c;
}

struct BodyVelocity {
  Vec3 com;
  Vec3 v;
  Vec3 omega;
  Mat3 R;
};

std::vector<BodyVelocity> body_velocities(const MultibodyModel& model, const Vector& x) {
  // Pose derivatives with respect to each configuration coordinate, then
  // contracted with the configuration rates, so the energy is an exact
  // quadratic form in the velocities.
  const int nq = model.nq();
  const int nl = static_cast<int>(model.links().size());
  const Vector rates = configuration_rates(model, x);
  const double eps = 1e-5;
  const auto P0 = link_poses(model, x);
  std::vector<Vec3> v(nl, Vec3::Zero());
  std::vector<Mat3> Rdot(nl, Mat3::Zero());
  for (int j = 0; j < nq; ++j) {
    if (rates[j] == 0.0) continue;
    Vector xp = x, xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    const auto Pp = link_poses(model, xp);
    const auto Pm = link_poses(model, xm);
    for (int i = 0; i < nl; ++i) {
      const Vec3& com = model.links()[i].com;
      const Vec3 cp = Pp[i].position + Pp[i].rotation * com;
      const Vec3 cm = Pm[i].position + Pm[i].rotation * com;
      v[i] += rates[j] * (cp - cm) / (2.0 * eps);
      Rdot[i] += rates[j] * (Pp[i].rotation - Pm[i].rotation) / (2.0 * eps);
    }
  }
  std::vector<BodyVelocity> out;
  for (int i = 0; i < nl; ++i) {
    BodyVelocity b;
    b.R = P0[i].rotation;
    b.com = P0[i].position + P0[i].rotation * model.links()[i].com;
    b.v = v[i];
    b.omega = vee(Rdot[i] * b.R.transpose());
    out.push_back(b);
  }
  return out;
}

}  // namespace

double kinetic_energy(const MultibodyModel& model, const Vector& x) {
  const auto bodies = body_velocities(model, x);
  double T = 0.0;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const Link& L = model.links()[i];
    const BodyVelocity& b = bodies[i];
    const Mat3 I_world = b.R * L.inertia * b.R.transpose();
    T += 0.5 * L.mass * b.v.squaredNorm() + 0.5 * b.omega.dot(I_world * b.omega);
  }
  return T;
}

Matrix mass_matrix(const MultibodyModel& model, const Vector& x) {
  const int nq = model.nq();
  Vector probe = x;
  auto energy = [&](const Vector& v) {
    probe.tail(nq) = v;
    return oracle::kinetic_energy(model, probe);
  };
  Matrix G(nq, nq);
  std::vector<double> diag(nq);
  for (int i = 0; i < nq; ++i) diag[i] = 2.0 * energy(Vector::Unit(nq, i));
  for (int i = 0; i < nq; ++i) {
    G(i, i) = diag[i];
    for (int j = i + 1; j < nq; ++j) {
      const double Tij = energy(Vector::Unit(nq, i) + Vector::Unit(nq, j));
      G(i, j) = G(j, i) = Tij - 0.5 * (diag[i] + diag[j]);
    }
  }
  return G;
}

Eigen::Matrix<double, 6, 1> spatial_momentum(const MultibodyModel& model, const Vector& x) {
  const auto bodies = body_velocities(model, x);
  Vec3 angular = Vec3::Zero(), linear = Vec3::Zero();
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const Link& L = model.links()[i];
    const BodyVelocity& b = bodies[i];
    const Vec3 p = L.mass * b.v;
    linear += p;
    angular += b.com.cross(p) + b.R * L.inertia * b.R.transpose() * b.omega;
  }
  Eigen::Matrix<double, 6, 1> out;
  out << angular, linear;
  return out;
}

double linear_cost(const LTVSystem& ltv, const QuadraticCost& cost, const Vector& dx0,
                   const Vector& U) {
  const int N = ltv.size();
  const int nu = ltv.nu();
  Vector x = dx0;
  double J = 0.0;
  for (int k = 0; k < N; ++k) {
    const Vector u = U.segment(k * nu, nu);
    const Matrix Qk = cost.Q_at(k), Rk = cost.R_at(k), Pk = cost.P_at(k);
    J += 0.5 * x.dot(Qk * x) + 0.5 * u.dot(Rk * u) + u.dot(Pk * x) + cost.q_at(k).dot(x) +
         cost.r_at(k).dot(u);
    x = ltv.A[k] * x + ltv.B[k] * u + ltv.g[k];
  }
  return J + 0.5 * x.dot(cost.QN * x) + cost.qN_or_zero().dot(x) + cost.c;
}

double dense_lqr_optimum(const LTVSystem& ltv, const QuadraticCost& cost, const Vector& dx0,
                         Vector* U_out) {
  const int N = ltv.size();
  const int nx = ltv.nx(), nu = ltv.nu();
  const int n = N * nu;
  // x_k = a_k + Gamma_k U
  Vector a = dx0;
  Matrix Gamma = Matrix::Zero(nx, n);
  Matrix H = Matrix::Zero(n, n);
  Vector b = Vector::Zero(n);
  for (int k = 0; k < N; ++k) {
    Matrix E = Matrix::Zero(nu, n);
    E.block(0, k * nu, nu, nu).setIdentity();
    const Matrix Qk = cost.Q_at(k), Rk = cost.R_at(k), Pk = cost.P_at(k);
    H += Gamma.transpose() * Qk * Gamma + E.transpose() * Rk * E +
         E.transpose() * Pk * Gamma + Gamma.transpose() * Pk.transpose() * E;
    b += Gamma.transpose() * (Qk * a + cost.q_at(k)) + E.transpose() * (Pk * a + cost.r_at(k));
    a = ltv.A[k] * a + ltv.g[k];
    Gamma = ltv.A[k] * Gamma + ltv.B[k] * E;
  }
  H += Gamma.transpose() * cost.QN * Gamma;
  b += Gamma.transpose() * (cost.QN * a + cost.qN_or_zero());
  const Vector U = H.ldlt().solve(-b);
  if (U_out) *U_out = U;
  return linear_cost(ltv, cost, dx0, U);
}

std::vector<Matrix> textbook_riccati(const Matrix& A, const Matrix& B, const Matrix& Q,
                                     const Matrix& R, const Matrix& QN, int N) {
  std::vector<Matrix> S(N + 1);
  S[N] = QN;
  for (int k = N - 1; k >= 0; --k) {
    const Matrix& P = S[k + 1];
    const Matrix gain = (R + B.transpose() * P * B).inverse() * (B.transpose() * P * A);
    S[k] = Q + A.transpose() * P * A - A.transpose() * P * B * gain;
  }
  return S;
}

LtiProblem random_lti(int nx, int nu, int N, std::mt19937_64& rng, bool affine_terms) {
  LtiProblem p;
  const Matrix A = random_matrix(nx, nx, rng, 1.2 / std::sqrt(static_cast<double>(nx)));
  const Matrix B = random_matrix(nx, nu, rng);
  Vector g = Vector::Zero(nx);
  if (affine_terms) g = random_vector(nx, rng, 0.5);
  p.ltv = constant_ltv({A, B}, g, Vector::Zero(nx), Vector::Zero(nu), 0.1, N);

  const Matrix M = random_spd(nx + nu, rng, 0.2, 3.0);
  p.cost.Q = {M.topLeftCorner(nx, nx)};
  p.cost.R = {M.bottomRightCorner(nu, nu)};
  p.cost.QN = random_spd(nx, rng, 0.2, 3.0);
  if (affine_terms) {
    p.cost.P = {M.bottomLeftCorner(nu, nx)};
    p.cost.q = {random_vector(nx, rng)};
    p.cost.r = {random_vector(nu, rng)};
    p.cost.qN = random_vector(nx, rng);
    p.cost.c = uniform(rng, -1.0, 1.0);
  }
  return p;
}

bool dense_segment_clear(const ObstacleField& field, const Vec3& a, const Vec3& b,
                         int samples) {
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const Vec3 p = (1.0 - t) * a + t * b;
    for (const auto& obs : field.obstacles) {
      const Vec3 d = p - obs.center();
      if (d.dot(obs.effective_shape() * d) < 1.0) return false;
    }
  }
  return true;
}

Trajectory constant_reference(const Vector& x, int nu, int steps, double h) {
  Trajectory t;
  t.h = h;
  t.states.assign(steps + 1, x);
  t.controls.assign(steps, Vector::Zero(nu));
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace freeflyer::oracle
