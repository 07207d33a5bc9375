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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/errors.hpp"
#include "freeflyer/harness.hpp"

namespace freeflyer {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg) {
  const int line = node.IsDefined() && !node.IsNull() ? node.Mark().line + 1 : 0;
  std::ostringstream os;
  os << "scenario";
  if (line > 0) os << " line " << line;
  os << ", field '" << field << "': " << msg;
  throw ParseError(os.str(), line, field);
}

// A YAML mapping with a fixed set of allowed keys.
class Section {
 public:
  Section(const YAML::Node& node, std::string path, std::set<std::string> keys)
      : node_(node), path_(std::move(path)) {
    if (!node_.IsDefined() || node_.IsNull()) return;
    if (!node_.IsMap()) fail(node_, path_.empty() ? "<root>" : path_, "expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!keys.count(key)) fail(kv.first, field(key), "unknown key");
    }
  }

  bool has(const std::string& key) const {
    if (!is_map()) return false;
    const YAML::Node n = node_[key];
    return n.IsDefined() && !n.IsNull();
  }
  YAML::Node at(const std::string& key) const { return is_map() ? node_[key] : YAML::Node(); }
  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    try {
      return at(key).as<double>();
    } catch (const YAML::Exception&) {
      fail(at(key), field(key), "expected a number");
    }
  }
  int integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    try {
      return at(key).as<int>();
    } catch (const YAML::Exception&) {
      fail(at(key), field(key), "expected an integer");
    }
  }
  std::uint64_t unsigned64(const std::string& key) const {
    try {
      return at(key).as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      fail(at(key), field(key), "expected a non-negative integer");
    }
  }
  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return def;
    try {
      return at(key).as<bool>();
    } catch (const YAML::Exception&) {
      fail(at(key), field(key), "expected true or false");
    }
  }
  std::string text(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    if (!at(key).IsScalar()) fail(at(key), field(key), "expected a string");
    return at(key).as<std::string>();
  }
  Vector vector(const std::string& key, const Vector& def) const {
    if (!has(key)) return def;
    const YAML::Node n = at(key);
    if (!n.IsSequence()) fail(n, field(key), "expected a list of numbers");
    Vector v(static_cast<int>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        v[static_cast<int>(i)] = n[i].as<double>();
      } catch (const YAML::Exception&) {
        fail(n[i], field(key), "expected a number");
      }
    }
    return v;
  }
  Vec3 vec3(const std::string& key, const Vec3& def) const {
    if (!has(key)) return def;
    const Vector v = vector(key, Vector());
    if (v.size() != 3) fail(at(key), field(key), "expected 3 numbers");
    return v;
  }

 private:
  bool is_map() const { return node_.IsDefined() && node_.IsMap(); }

  YAML::Node node_;
  std::string path_;
};

EllipsoidSpec read_ellipsoid(const YAML::Node& node, const std::string& path,
                             const std::string& default_name) {
  Section s(node, path, {"name", "center", "semi_axes", "safety_factor"});
  EllipsoidSpec e;
  e.name = s.text("name", default_name);
  if (!s.has("center")) fail(node, s.field("center"), "required");
  e.center = s.vec3("center", Vec3::Zero());
  if (!s.has("semi_axes")) fail(node, s.field("semi_axes"), "required");
  e.semi_axes = s.vec3("semi_axes", Vec3::Zero());
  e.safety_factor = s.number("safety_factor", 1.0);
  return e;
}

void read_weights(const Section& s, DiagonalWeights* w) {
  w->q_config = s.number("q_config", w->q_config);
  w->q_velocity = s.number("q_velocity", w->q_velocity);
  w->r = s.number("r", w->r);
  w->terminal_scale = s.number("terminal_scale", w->terminal_scale);
}

void validation(const std::string& msg) { throw ValidationError("scenario: " + msg); }

}  // namespace

EllipsoidObstacle EllipsoidSpec::obstacle() const {
  if (!(semi_axes.array() > 0.0).all()) {
    validation("ellipsoid '" + name + "' needs positive semi-axes");
  }
  return EllipsoidObstacle::with_semi_axes(center, semi_axes, safety_factor, name);
}

Matrix DiagonalWeights::Q(int nq) const {
  Vector d(2 * nq);
  d.head(nq).setConstant(q_config);
  d.tail(nq).setConstant(q_velocity);
  return d.asDiagonal();
}

Matrix DiagonalWeights::QN(int nq) const { return terminal_scale * Q(nq); }

Matrix DiagonalWeights::R(int nu) const { return r * Matrix::Identity(nu, nu); }

QuadraticCost DiagonalWeights::cost(int nq, int nu) const {
  return QuadraticCost::uniform(Q(nq), R(nu), QN(nq));
}

PlannerConfig PlannerSettings::config(const MultibodyModel& model, const Vector& start,
                                      std::uint64_t seed) const {
  PlannerConfig pc = PlannerConfig::for_base(model, start, lower, upper);
  pc.gamma = gamma;
  pc.max_iterations = max_iterations;
  pc.goal_bias = goal_bias;
  pc.h = h;
  pc.v_max = v_max;
  pc.metric_horizon = metric_horizon;
  pc.max_near = max_near;
  pc.stop_at_first = stop_at_first;
  pc.seed = seed;
  return pc;
}

std::uint64_t ScenarioConfig::seed_or_throw() const {
  if (!seed) validation("seed is required (no wall-clock entropy is used)");
  return *seed;
}

MultibodyModel ScenarioConfig::model() const { return MultibodyModel(robot); }

Vector ScenarioConfig::start_state(const MultibodyModel& m) const {
  const Vector q = start_joints.size() ? start_joints : Vector::Zero(m.num_joints());
  return make_state(m, start_position, start_euler, q);
}

EllipsoidObstacle ScenarioConfig::part_obstacle(int i) const {
  return EllipsoidObstacle::with_semi_axes(parts.at(i).goal, part_semi_axes, part_safety_factor,
                                           parts.at(i).name);
}

ObstacleField ScenarioConfig::static_field() const {
  ObstacleField f;
  if (printer) f.add(printer->obstacle());
  for (const auto& o : obstacles) f.add(o.obstacle());
  return f;
}

MpcConfig ScenarioConfig::resolved_mpc(const MultibodyModel& m) const {
  MpcConfig c = mpc;
  c.Q = mpc_weights.Q(m.nq());
  c.QN = mpc_weights.QN(m.nq());
  c.R = mpc_weights.R(m.nu());
  return c;
}

void ScenarioConfig::validate() const {
  seed_or_throw();
  robot.validate();
  const MultibodyModel m = model();
  if (start_joints.size() != 0 && start_joints.size() != m.num_joints()) {
    validation("start.joints needs " + std::to_string(m.num_joints()) + " entries");
  }
  if (!(planner.lower.array() < planner.upper.array()).all()) {
    validation("planner.lower must be below planner.upper on every axis");
  }
  auto inside_bounds = [&](const Vec3& p) {
    return (p.array() >= planner.lower.array()).all() && (p.array() <= planner.upper.array()).all();
  };
  if (!inside_bounds(start_position)) validation("start.position lies outside the planner bounds");
  if (!(planner.gamma > 0.0) || planner.max_iterations < 0 || !(planner.h > 0.0) ||
      !(planner.v_max > 0.0) || planner.metric_horizon < 1 || planner.max_near < 1 ||
      !(planner.goal_bias >= 0.0 && planner.goal_bias <= 1.0)) {
    validation("planner settings out of range");
  }
  if (!(planner.inflation >= 1.0)) validation("planner.inflation must be >= 1");
  if (shortcut.iterations < 0 || !(shortcut.knot_spacing > 0.0)) {
    validation("smoother.iterations must be >= 0 and knot_spacing > 0");
  }
  if (!(retime.h > 0.0) || !(retime.v_max > 0.0) || !(retime.a_max > 0.0) ||
      retime.settle_time < 0.0) {
    validation("smoother h, v_max and a_max must be positive, settle_time >= 0");
  }
  if (!(lqr.r > 0.0) || lqr.q_config < 0.0 || lqr.q_velocity < 0.0 || lqr.terminal_scale < 0.0) {
    validation("lqr weights must be non-negative with r > 0");
  }
  if (!(mpc_weights.r > 0.0) || mpc_weights.q_config < 0.0 || mpc_weights.q_velocity < 0.0 ||
      mpc_weights.terminal_scale < 0.0) {
    validation("mpc weights must be non-negative with r > 0");
  }
  try {
    resolved_mpc(m).validate(m.nx(), m.nu());
  } catch (const ConfigError& e) {
    validation(e.what());
  }
  if (!(assembly.attach_tolerance > 0.0) || !(assembly.joint_tolerance > 0.0) ||
      assembly.place_hold < 0.0) {
    validation("assembly tolerances must be positive and place_hold >= 0");
  }

  const ObstacleField field = static_field();
  if (!point_clear(field, start_position)) validation("start.position is inside an obstacle");
  if (!parts.empty() && !printer) validation("parts need a printer to come from");
  if (printer && !point_clear(printer->obstacle(), printer_output)) {
    validation("printer.output lies inside the printer");
  }
  if (!(part_semi_axes.array() > 0.0).all() || !(part_safety_factor >= 1.0)) {
    validation("parts need positive semi-axes and safety_factor >= 1");
  }
  std::set<std::string> names;
  for (int i = 0; i < static_cast<int>(parts.size()); ++i) {
    if (!names.insert(parts[i].name).second) {
      validation("duplicate part name '" + parts[i].name + "'");
    }
    if (!inside_bounds(parts[i].goal)) {
      validation("goal of part '" + parts[i].name + "' lies outside the planner bounds");
    }
    const EllipsoidObstacle a = part_obstacle(i);
    for (int j = 0; j < i; ++j) {
      if (ellipsoids_overlap(a, part_obstacle(j))) {
        validation("goals of parts '" + parts[j].name + "' and '" + parts[i].name + "' overlap");
      }
    }
    for (const auto& o : field.obstacles) {
      if (ellipsoids_overlap(a, o)) {
        validation("goal of part '" + parts[i].name + "' overlaps obstacle '" + o.name() + "'");
      }
    }
  }
}

ScenarioConfig parse_scenario(const std::string& yaml_text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ParseError("scenario line " + std::to_string(e.mark.line + 1) + ": " + e.msg,
                     e.mark.line + 1, "");
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  const Section top(root, "",
                    {"name", "seed", "output_dir", "robot", "start", "goal", "printer", "parts",
                     "obstacles", "planner", "smoother", "lqr", "mpc", "assembly"});
  ScenarioConfig c;
  c.name = top.text("name", c.name);
  if (top.has("seed")) c.seed = top.unsigned64("seed");
  c.output_dir = top.text("output_dir", "");

  const Section robot(top.at("robot"), "robot", {"file", "link_length"});
  c.link_length = robot.number("link_length", c.link_length);
  c.robot_file = robot.text("file", "");
  if (!c.robot_file.empty()) {
    std::filesystem::path p(c.robot_file);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    c.robot = load_robot_description(p.string());
  } else {
    if (!(c.link_length > 0.0)) fail(robot.at("link_length"), "robot.link_length", "must be > 0");
    c.robot = RobotDescription::astrobee(c.link_length);
  }

  const Section start(top.at("start"), "start", {"position", "euler", "joints"});
  c.start_position = start.vec3("position", c.start_position);
  c.start_euler = start.vec3("euler", c.start_euler);
  c.start_joints = start.vector("joints", Vector());

  if (top.has("goal")) {
    const Section goal(top.at("goal"), "goal", {"position"});
    c.goal_position = goal.vec3("position", Vec3::Zero());
  }

  if (top.has("printer")) {
    const Section pr(top.at("printer"), "printer",
                     {"name", "center", "semi_axes", "safety_factor", "output"});
    EllipsoidSpec e;
    e.name = pr.text("name", "printer");
    e.center = pr.vec3("center", Vec3::Zero());
    e.semi_axes = pr.vec3("semi_axes", Vec3::Constant(0.3));
    e.safety_factor = pr.number("safety_factor", 1.5);
    c.printer = e;
    c.printer_output = pr.vec3("output", c.printer_output);
  }

  if (top.has("parts")) {
    const Section parts(top.at("parts"), "parts", {"semi_axes", "safety_factor", "goals"});
    c.part_semi_axes = parts.vec3("semi_axes", c.part_semi_axes);
    c.part_safety_factor = parts.number("safety_factor", c.part_safety_factor);
    const YAML::Node goals = parts.at("goals");
    if (goals.IsDefined() && !goals.IsNull()) {
      if (!goals.IsSequence()) fail(goals, "parts.goals", "expected a list");
      for (std::size_t i = 0; i < goals.size(); ++i) {
        const std::string path = "parts.goals[" + std::to_string(i) + "]";
        const Section g(goals[i], path, {"name", "position"});
        PartSpec p;
        p.name = g.text("name", "part" + std::to_string(i + 1));
        if (!g.has("position")) fail(goals[i], path + ".position", "required");
        p.goal = g.vec3("position", Vec3::Zero());
        c.parts.push_back(p);
      }
    }
  }

  if (top.has("obstacles")) {
    const YAML::Node obs = top.at("obstacles");
    if (!obs.IsSequence()) fail(obs, "obstacles", "expected a list");
    for (std::size_t i = 0; i < obs.size(); ++i) {
      c.obstacles.push_back(read_ellipsoid(obs[i], "obstacles[" + std::to_string(i) + "]",
                                           "obstacle" + std::to_string(i + 1)));
    }
  }

  const Section pl(top.at("planner"), "planner",
                   {"gamma", "max_iterations", "goal_bias", "h", "v_max", "metric_horizon",
                    "max_near", "stop_at_first", "inflation", "lower", "upper"});
  auto& P = c.planner;
  P.gamma = pl.number("gamma", P.gamma);
  P.max_iterations = pl.integer("max_iterations", P.max_iterations);
  P.goal_bias = pl.number("goal_bias", P.goal_bias);
  P.h = pl.number("h", P.h);
  P.v_max = pl.number("v_max", P.v_max);
  P.metric_horizon = pl.integer("metric_horizon", P.metric_horizon);
  P.max_near = pl.integer("max_near", P.max_near);
  P.stop_at_first = pl.flag("stop_at_first", P.stop_at_first);
  P.inflation = pl.number("inflation", P.inflation);
  P.lower = pl.vec3("lower", P.lower);
  P.upper = pl.vec3("upper", P.upper);

  const Section sm(top.at("smoother"), "smoother",
                   {"iterations", "knot_spacing", "h", "v_max", "a_max", "settle_time"});
  c.shortcut.iterations = sm.integer("iterations", c.shortcut.iterations);
  c.shortcut.knot_spacing = sm.number("knot_spacing", c.shortcut.knot_spacing);
  c.retime.h = sm.number("h", c.retime.h);
  c.retime.v_max = sm.number("v_max", c.retime.v_max);
  c.retime.a_max = sm.number("a_max", c.retime.a_max);
  c.retime.settle_time = sm.number("settle_time", c.retime.settle_time);

  read_weights(Section(top.at("lqr"), "lqr", {"q_config", "q_velocity", "r", "terminal_scale"}),
               &c.lqr);

  const Section mp(top.at("mpc"), "mpc",
                   {"horizon", "tolerance", "max_inner_iterations", "memory", "max_line_search",
                    "penalty_initial", "penalty_growth", "max_outer_iterations",
                    "constraint_tolerance", "obstacle_inflation", "precondition", "q_config",
                    "q_velocity", "r", "terminal_scale", "u_lower", "u_upper"});
  auto& M = c.mpc;
  M.horizon = mp.integer("horizon", M.horizon);
  M.tolerance = mp.number("tolerance", M.tolerance);
  M.max_inner_iterations = mp.integer("max_inner_iterations", M.max_inner_iterations);
  M.memory = mp.integer("memory", M.memory);
  M.max_line_search = mp.integer("max_line_search", M.max_line_search);
  M.penalty_initial = mp.number("penalty_initial", M.penalty_initial);
  M.penalty_growth = mp.number("penalty_growth", M.penalty_growth);
  M.max_outer_iterations = mp.integer("max_outer_iterations", M.max_outer_iterations);
  M.constraint_tolerance = mp.number("constraint_tolerance", M.constraint_tolerance);
  M.obstacle_inflation = mp.number("obstacle_inflation", M.obstacle_inflation);
  M.precondition = mp.flag("precondition", M.precondition);
  M.u_lower = mp.vector("u_lower", Vector());
  M.u_upper = mp.vector("u_upper", Vector());
  read_weights(mp, &c.mpc_weights);

  const Section as(top.at("assembly"), "assembly",
                   {"grasp_angle", "retract_angle", "attach_tolerance", "joint_tolerance",
                    "place_hold"});
  auto& A = c.assembly;
  A.grasp_angle = as.number("grasp_angle", A.grasp_angle);
  A.retract_angle = as.number("retract_angle", A.retract_angle);
  A.attach_tolerance = as.number("attach_tolerance", A.attach_tolerance);
  A.joint_tolerance = as.number("joint_tolerance", A.joint_tolerance);
  A.place_hold = as.number("place_hold", A.place_hold);

  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string dump_scenario(const ScenarioConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  auto vec = [&out](const Vector& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (int i = 0; i < v.size(); ++i) out << v[i];
    out << YAML::EndSeq;
  };
  auto kv = [&out](const char* key) -> YAML::Emitter& {
    return out << YAML::Key << key << YAML::Value;
  };
  auto weights = [&](const DiagonalWeights& w) {
    kv("q_config") << w.q_config;
    kv("q_velocity") << w.q_velocity;
    kv("r") << w.r;
    kv("terminal_scale") << w.terminal_scale;
  };

  out << YAML::BeginMap;
  kv("name") << c.name;
  if (c.seed) kv("seed") << *c.seed;
  if (!c.output_dir.empty()) kv("output_dir") << c.output_dir;

  kv("robot") << YAML::BeginMap;
  if (!c.robot_file.empty()) {
    kv("file") << c.robot_file;
  } else {
    kv("link_length") << c.link_length;
  }
  out << YAML::EndMap;

  kv("start") << YAML::BeginMap;
  kv("position");
  vec(c.start_position);
  kv("euler");
  vec(c.start_euler);
  kv("joints");
  vec(c.start_joints.size() ? c.start_joints : Vector::Zero(c.robot.num_joints()));
  out << YAML::EndMap;

  if (c.goal_position) {
    kv("goal") << YAML::BeginMap;
    kv("position");
    vec(*c.goal_position);
    out << YAML::EndMap;
  }
  if (c.printer) {
    kv("printer") << YAML::BeginMap;
    kv("name") << c.printer->name;
    kv("center");
    vec(c.printer->center);
    kv("semi_axes");
    vec(c.printer->semi_axes);
    kv("safety_factor") << c.printer->safety_factor;
    kv("output");
    vec(c.printer_output);
    out << YAML::EndMap;
  }

  kv("parts") << YAML::BeginMap;
  kv("semi_axes");
  vec(c.part_semi_axes);
  kv("safety_factor") << c.part_safety_factor;
  kv("goals") << YAML::BeginSeq;
  for (const auto& p : c.parts) {
    out << YAML::BeginMap;
    kv("name") << p.name;
    kv("position");
    vec(p.goal);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  kv("obstacles") << YAML::BeginSeq;
  for (const auto& o : c.obstacles) {
    out << YAML::BeginMap;
    kv("name") << o.name;
    kv("center");
    vec(o.center);
    kv("semi_axes");
    vec(o.semi_axes);
    kv("safety_factor") << o.safety_factor;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  const auto& P = c.planner;
  kv("planner") << YAML::BeginMap;
  kv("gamma") << P.gamma;
  kv("max_iterations") << P.max_iterations;
  kv("goal_bias") << P.goal_bias;
  kv("h") << P.h;
  kv("v_max") << P.v_max;
  kv("metric_horizon") << P.metric_horizon;
  kv("max_near") << P.max_near;
  kv("stop_at_first") << P.stop_at_first;
  kv("inflation") << P.inflation;
  kv("lower");
  vec(P.lower);
  kv("upper");
  vec(P.upper);
  out << YAML::EndMap;

  kv("smoother") << YAML::BeginMap;
  kv("iterations") << c.shortcut.iterations;
  kv("knot_spacing") << c.shortcut.knot_spacing;
  kv("h") << c.retime.h;
  kv("v_max") << c.retime.v_max;
  kv("a_max") << c.retime.a_max;
  kv("settle_time") << c.retime.settle_time;
  out << YAML::EndMap;

  kv("lqr") << YAML::BeginMap;
  weights(c.lqr);
  out << YAML::EndMap;

  const auto& M = c.mpc;
  kv("mpc") << YAML::BeginMap;
  kv("horizon") << M.horizon;
  kv("tolerance") << M.tolerance;
  kv("max_inner_iterations") << M.max_inner_iterations;
  kv("memory") << M.memory;
  kv("max_line_search") << M.max_line_search;
  kv("penalty_initial") << M.penalty_initial;
  kv("penalty_growth") << M.penalty_growth;
  kv("max_outer_iterations") << M.max_outer_iterations;
  kv("constraint_tolerance") << M.constraint_tolerance;
  kv("obstacle_inflation") << M.obstacle_inflation;
  kv("precondition") << M.precondition;
  weights(c.mpc_weights);
  if (M.u_lower.size()) {
    kv("u_lower");
    vec(M.u_lower);
    kv("u_upper");
    vec(M.u_upper);
  }
  out << YAML::EndMap;

  const auto& A = c.assembly;
  kv("assembly") << YAML::BeginMap;
  kv("grasp_angle") << A.grasp_angle;
  kv("retract_angle") << A.retract_angle;
  kv("attach_tolerance") << A.attach_tolerance;
  kv("joint_tolerance") << A.joint_tolerance;
  kv("place_hold") << A.place_hold;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace freeflyer
