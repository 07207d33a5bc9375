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

#include "freeflyer/robot.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <yaml-cpp/yaml.h>

#include "freeflyer/errors.hpp"

namespace freeflyer {

int RobotDescription::num_joints() const {
  int n = 0;
  for (const auto& j : joints) {
    if (j.type == JointType::kRevolute) ++n;
  }
  return n;
}

void RobotDescription::validate() const {
  if (bodies.empty()) throw ValidationError("robot: no bodies");
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(bodies.size()); ++i) {
    const auto& b = bodies[i];
    if (!index.emplace(b.name, i).second) {
      throw ValidationError("robot: duplicate body name '" + b.name + "'");
    }
    if (!(b.mass > 0.0) || !std::isfinite(b.mass)) {
      throw ValidationError("robot: body '" + b.name + "' must have mass > 0");
    }
    if (!b.inertia.allFinite() || !b.com.allFinite()) {
      throw ValidationError("robot: body '" + b.name + "' has non-finite inertia");
    }
    const double scale = std::max(1.0, b.inertia.cwiseAbs().maxCoeff());
    if ((b.inertia - b.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ValidationError("robot: inertia of body '" + b.name + "' is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(b.inertia);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw ValidationError("robot: inertia of body '" + b.name +
                            "' is not positive semidefinite");
    }
  }
  if (!index.count(base)) throw ValidationError("robot: base body '" + base + "' not found");

  std::map<std::string, std::string> parent_of;
  for (const auto& j : joints) {
    if (!index.count(j.parent)) {
      throw ValidationError("robot: joint '" + j.name + "' has unknown parent '" + j.parent + "'");
    }
    if (!index.count(j.child)) {
      throw ValidationError("robot: joint '" + j.name + "' has unknown child '" + j.child + "'");
    }
    if (j.child == base) {
      throw ValidationError("robot: joint '" + j.name + "' uses the base as a child");
    }
    if (!parent_of.emplace(j.child, j.parent).second) {
      throw ValidationError("robot: body '" + j.child + "' has more than one parent joint");
    }
    if (!j.origin.allFinite()) {
      throw ValidationError("robot: joint '" + j.name + "' has a non-finite origin");
    }
    if (j.type == JointType::kRevolute && std::abs(j.axis.norm() - 1.0) > 1e-6) {
      throw ValidationError("robot: joint '" + j.name + "' axis is not a unit vector");
    }
  }
  // Every body must reach the base by following parent links.
  for (const auto& b : bodies) {
    std::string cur = b.name;
    std::set<std::string> seen;
    while (cur != base) {
      if (!seen.insert(cur).second) {
        throw ValidationError("robot: joint graph has a cycle through '" + cur + "'");
      }
      auto it = parent_of.find(cur);
      if (it == parent_of.end()) {
        throw ValidationError("robot: body '" + b.name + "' is not connected to the base");
      }
      cur = it->second;
    }
  }
  if (num_joints() > kMaxJoints) {
    throw ValidationError("robot: at most " + std::to_string(kMaxJoints) +
                          " revolute joints are supported");
  }
}

RobotDescription RobotDescription::astrobee(double link_length) {
  RobotDescription d;
  d.base = "base";
  d.bodies.push_back({"base", 7.0, Mat3::Identity() * 0.11, Vec3::Zero()});
  d.bodies.push_back({"arm1", 1.0, Mat3::Identity() * 0.05, Vec3(0.5 * link_length, 0, 0)});
  d.bodies.push_back({"arm2", 1.0, Mat3::Identity() * 0.05, Vec3(0.5 * link_length, 0, 0)});
  d.bodies.push_back({"end_effector", 4.0, Mat3::Zero(), Vec3::Zero()});
  d.joints.push_back({"shoulder", "base", "arm1", JointType::kRevolute, Vec3::UnitY(),
                      Vec3(0.16, 0.0, 0.0)});
  d.joints.push_back({"elbow", "arm1", "arm2", JointType::kRevolute, Vec3::UnitY(),
                      Vec3(link_length, 0.0, 0.0)});
  d.joints.push_back({"tool", "arm2", "end_effector", JointType::kFixed, Vec3::UnitZ(),
                      Vec3(link_length, 0.0, 0.0)});
  return d;
}

namespace {

[[noreturn]] void parse_fail(const YAML::Node& node, const std::string& field,
                             const std::string& msg) {
  const int line = node.IsDefined() ? node.Mark().line + 1 : 0;
  std::ostringstream os;
  os << "robot description";
  if (line > 0) os << " line " << line;
  os << ", field '" << field << "': " << msg;
  throw ParseError(os.str(), line, field);
}

double read_double(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    parse_fail(node, field, "expected a number");
  }
}

Vec3 read_vec3(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() != 3) parse_fail(node, field, "expected 3 numbers");
  return Vec3(read_double(node[0], field), read_double(node[1], field),
              read_double(node[2], field));
}

Mat3 read_inertia(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() != 3) {
    parse_fail(node, field, "expected [Ixx, Iyy, Izz] or a 3x3 matrix");
  }
  if (node[0].IsSequence()) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = read_vec3(node[r], field).transpose();
    return m;
  }
  return read_vec3(node, field).asDiagonal();
}

std::string read_string(const YAML::Node& node, const std::string& field) {
  if (!node.IsDefined() || !node.IsScalar()) parse_fail(node, field, "expected a string");
  return node.as<std::string>();
}

}  // namespace

RobotDescription parse_robot_description(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ParseError("robot description line " + std::to_string(e.mark.line + 1) + ": " + e.msg,
                     e.mark.line + 1, "");
  }
  RobotDescription d;
  if (!root.IsMap()) parse_fail(root, "<root>", "expected a mapping");
  d.base = read_string(root["base"], "base");
  const auto bodies = root["bodies"];
  if (!bodies.IsSequence()) parse_fail(bodies, "bodies", "expected a list");
  for (const auto& b : bodies) {
    BodySpec s;
    s.name = read_string(b["name"], "bodies.name");
    s.mass = read_double(b["mass"], "bodies." + s.name + ".mass");
    if (b["inertia"]) s.inertia = read_inertia(b["inertia"], "bodies." + s.name + ".inertia");
    if (b["com"]) s.com = read_vec3(b["com"], "bodies." + s.name + ".com");
    d.bodies.push_back(s);
  }
  const auto joints = root["joints"];
  if (joints && !joints.IsSequence()) parse_fail(joints, "joints", "expected a list");
  if (joints) {
    for (const auto& j : joints) {
      JointSpec s;
      s.name = read_string(j["name"], "joints.name");
      const std::string f = "joints." + s.name;
      s.parent = read_string(j["parent"], f + ".parent");
      s.child = read_string(j["child"], f + ".child");
      const std::string type = j["type"] ? read_string(j["type"], f + ".type") : "revolute";
      if (type == "revolute") {
        s.type = JointType::kRevolute;
      } else if (type == "fixed") {
        s.type = JointType::kFixed;
      } else {
        parse_fail(j["type"], f + ".type", "unknown joint type '" + type + "'");
      }
      if (j["axis"]) s.axis = read_vec3(j["axis"], f + ".axis");
      if (j["origin"]) s.origin = read_vec3(j["origin"], f + ".origin");
      d.joints.push_back(s);
    }
  }
  d.validate();
  return d;
}

RobotDescription load_robot_description(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open robot description '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_robot_description(ss.str());
}

std::string dump_robot_description(const RobotDescription& desc) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  auto vec = [&out](const Vec3& v) {
    out << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << v.z() << YAML::EndSeq;
  };
  out << YAML::BeginMap;
  out << YAML::Key << "base" << YAML::Value << desc.base;
  out << YAML::Key << "bodies" << YAML::Value << YAML::BeginSeq;
  for (const auto& b : desc.bodies) {
    out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << b.name;
    out << YAML::Key << "mass" << YAML::Value << b.mass;
    out << YAML::Key << "inertia" << YAML::Value << YAML::BeginSeq;
    for (int r = 0; r < 3; ++r) vec(b.inertia.row(r).transpose());
    out << YAML::EndSeq;
    out << YAML::Key << "com" << YAML::Value;
    vec(b.com);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "joints" << YAML::Value << YAML::BeginSeq;
  for (const auto& j : desc.joints) {
    out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << j.name;
    out << YAML::Key << "parent" << YAML::Value << j.parent;
    out << YAML::Key << "child" << YAML::Value << j.child;
    out << YAML::Key << "type" << YAML::Value
        << (j.type == JointType::kRevolute ? "revolute" : "fixed");
    out << YAML::Key << "axis" << YAML::Value;
    vec(j.axis);
    out << YAML::Key << "origin" << YAML::Value;
    vec(j.origin);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

MultibodyModel::MultibodyModel(const RobotDescription& desc) {
  desc.validate();
  std::map<std::string, const BodySpec*> body;
  for (const auto& b : desc.bodies) body[b.name] = &b;
  std::multimap<std::string, const JointSpec*> children;
  for (const auto& j : desc.joints) children.emplace(j.parent, &j);

  // Depth-first walk. Bodies welded by fixed joints are folded into the link
  // that owns them; `offset` is the welded body's origin in that link frame.
  struct Lump {
    double mass = 0.0;
    Vec3 first_moment = Vec3::Zero();
    std::vector<std::pair<const BodySpec*, Vec3>> parts;
  };
  std::vector<Lump> lumps;

  auto add_link = [&](int parent, const Vec3& origin, const Vec3& axis, const std::string& name) {
    Link l;
    l.name = name;
    l.parent = parent;
    l.origin = origin;
    l.axis = axis.normalized();
    links_.push_back(l);
    lumps.emplace_back();
    return static_cast<int>(links_.size()) - 1;
  };

  // (body name, owning link, offset of body origin within link frame)
  std::vector<std::tuple<std::string, int, Vec3>> stack;
  add_link(-1, Vec3::Zero(), Vec3::UnitZ(), desc.base);
  stack.emplace_back(desc.base, 0, Vec3::Zero());
  bool have_tool = false;
  while (!stack.empty()) {
    auto [name, link, offset] = stack.back();
    stack.pop_back();
    const BodySpec* b = body.at(name);
    lumps[link].parts.emplace_back(b, offset);
    // Children in reverse so the first-listed joint is numbered first.
    auto range = children.equal_range(name);
    std::vector<const JointSpec*> kids;
    for (auto it = range.first; it != range.second; ++it) kids.push_back(it->second);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
      const JointSpec* j = *it;
      if (j->type == JointType::kFixed) {
        stack.emplace_back(j->child, link, offset + j->origin);
        if (!children.count(j->child)) {
          tool_point_ = offset + j->origin + body.at(j->child)->com;
          have_tool = true;
        }
      } else {
        const int child = add_link(link, offset + j->origin, j->axis, j->child);
        stack.emplace_back(j->child, child, Vec3::Zero());
      }
    }
  }

  for (std::size_t i = 0; i < links_.size(); ++i) {
    Link& l = links_[i];
    double m = 0.0;
    Vec3 mc = Vec3::Zero();
    for (const auto& [b, off] : lumps[i].parts) {
      m += b->mass;
      mc += b->mass * (off + b->com);
    }
    l.mass = m;
    l.com = mc / m;
    l.inertia.setZero();
    for (const auto& [b, off] : lumps[i].parts) {
      const Vec3 d = off + b->com - l.com;
      l.inertia += b->inertia + b->mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
    }
    total_mass_ += m;
  }
  if (!have_tool) tool_point_ = links_.back().com;
}

bool MultibodyModel::is_ancestor(int ancestor, int link) const {
  for (int cur = link; cur >= 0; cur = links_[cur].parent) {
    if (cur == ancestor) return true;
  }
  return false;
}

Vector make_state(const MultibodyModel& model, const Vec3& position, const Vec3& euler,
                  const Vector& joints) {
  const int nj = model.num_joints();
  if (joints.size() != nj) throw ContractViolation("make_state: joint vector size mismatch");
  Vector x = Vector::Zero(model.nx());
  x.segment<3>(state::position(nj)) = position;
  x.segment<3>(state::euler(nj)) = euler;
  x.segment(state::joints(nj), nj) = joints;
  return x;
}

}  // namespace freeflyer
