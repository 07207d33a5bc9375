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

#ifndef FREEFLYER_ROBOT_HPP_
#define FREEFLYER_ROBOT_HPP_

#include <string>
#include <vector>

#include <Eigen/Core>

namespace freeflyer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Upper bound on revolute joints; keeps the hot loops free of heap traffic.
inline constexpr int kMaxJoints = 8;
inline constexpr int kMaxDof = 6 + kMaxJoints;
inline constexpr int kMaxLinks = 1 + kMaxJoints;

enum class JointType { kRevolute, kFixed };

struct BodySpec {
  std::string name;
  double mass = 0.0;             // kg
  Mat3 inertia = Mat3::Zero();   // kg m^2, about the centre of mass, body axes
  Vec3 com = Vec3::Zero();       // m, in the body frame
};

// The child frame sits at `origin` (parent frame) and is rotated about `axis`
// by the joint angle. Fixed joints weld the child onto the parent.
struct JointSpec {
  std::string name;
  std::string parent;
  std::string child;
  JointType type = JointType::kRevolute;
  Vec3 axis = Vec3::UnitZ();
  Vec3 origin = Vec3::Zero();
};

struct RobotDescription {
  std::vector<BodySpec> bodies;
  std::vector<JointSpec> joints;
  std::string base;

  int num_joints() const;  // revolute joints only

  // Throws ValidationError naming the violated invariant.
  void validate() const;

  // Table-1 free-flyer: 7 kg base, two 1 kg links, 4 kg end-effector point
  // mass. Link lengths and mounting point are nominal scenario parameters.
  static RobotDescription astrobee(double link_length = 0.15);
};

RobotDescription parse_robot_description(const std::string& yaml_text);
RobotDescription load_robot_description(const std::string& path);
std::string dump_robot_description(const RobotDescription& desc);

// One rigid link of the compiled chain. Fixed joints are merged away, so
// every non-base link has exactly one revolute joint to its parent.
struct Link {
  std::string name;
  int parent = -1;
  Vec3 origin = Vec3::Zero();   // joint position in the parent frame
  Vec3 axis = Vec3::UnitZ();    // joint axis in the parent frame
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about com
};

// Compiled, immutable form of a RobotDescription. Links are stored in
// topological order (parent index < child index); link 0 is the base and
// link i > 0 is driven by joint i - 1.
//
// State layout, n_q = 6 + N_m generalized coordinates:
//   x = [ r (3) | roll pitch yaw (3) | q_m (N_m) | v (3) | omega (3) | qdot_m (N_m) ]
// v and omega are the world-frame linear velocity of the base origin and the
// world-frame base angular velocity. Controls are the dual generalized forces:
//   u = [ world force on base (3) | world torque about base origin (3) | joint torques ]
class MultibodyModel {
 public:
  explicit MultibodyModel(const RobotDescription& desc);

  int num_joints() const { return static_cast<int>(links_.size()) - 1; }
  int nq() const { return 6 + num_joints(); }
  int nx() const { return 2 * nq(); }
  int nu() const { return nq(); }

  const std::vector<Link>& links() const { return links_; }
  double total_mass() const { return total_mass_; }
  // Point (link frame) where the end-effector mass sits on the last link.
  const Vec3& tool_point() const { return tool_point_; }

  // true when `ancestor` is on the path from `link` to the base (inclusive).
  bool is_ancestor(int ancestor, int link) const;

 private:
  std::vector<Link> links_;
  double total_mass_ = 0.0;
  Vec3 tool_point_ = Vec3::Zero();
};

namespace state {
// Offsets into the state vector for a model with `nj` joints.
inline int position(int) { return 0; }
inline int euler(int) { return 3; }
inline int joints(int) { return 6; }
inline int velocity(int nj) { return 6 + nj; }
inline int linear_velocity(int nj) { return 6 + nj; }
inline int angular_velocity(int nj) { return 9 + nj; }
inline int joint_rates(int nj) { return 12 + nj; }
}  // namespace state

// A zero-velocity state at the given pose.
Vector make_state(const MultibodyModel& model, const Vec3& position,
                  const Vec3& euler, const Vector& joints);

}  // namespace freeflyer

#endif  // FREEFLYER_ROBOT_HPP_
