// Copyright 2026 The sepsim Authors
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

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <yaml-cpp/yaml.h>

#include "sepsim/prosthesis.hpp"

namespace sepsim {
namespace {

constexpr char kHeader[] = "sepsim-model v1";

YAML::Node LoadBody(const std::string& text) {
  std::istringstream in(text);
  std::string first;
  std::getline(in, first);
  if (!first.empty() && first.back() == '\r') first.pop_back();
  if (first != kHeader) {
    throw Error(ErrorKind::kSchema,
                "model file must start with '" + std::string(kHeader) + "'");
  }
  try {
    return YAML::Load(in);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::kSchema, std::string("model file: ") + e.what());
  }
}

YAML::Node Require(const YAML::Node& node, const std::string& key,
                   const std::string& where) {
  if (!node.IsMap() || !node[key]) {
    throw Error(ErrorKind::kSchema, "missing key '" + key + "' in " + where);
  }
  return node[key];
}

double Number(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorKind::kSchema, what + " must be a number");
  }
}

double NumberOr(const YAML::Node& node, const std::string& key, double fallback,
                const std::string& where) {
  if (!node || !node[key]) return fallback;
  return Number(node[key], where + "." + key);
}

void CheckFraction(double f, const std::string& what) {
  if (!(f > 0.0 && f < 1.0)) {
    throw Error(ErrorKind::kConfig, what + " must lie in (0, 1)");
  }
}

PartSpec ParsePart(const YAML::Node& node, const std::string& where) {
  PartSpec p;
  p.mass = Number(Require(node, "mass", where), where + ".mass");
  p.length = NumberOr(node, "length", 0.0, where);
  p.com = NumberOr(node, "com", p.com, where);
  p.gyration = NumberOr(node, "gyration", p.gyration, where);
  if (!(p.mass > 0.0)) throw Error(ErrorKind::kConfig, where + ".mass must be > 0");
  CheckFraction(p.com, where + ".com");
  CheckFraction(p.gyration, where + ".gyration");
  return p;
}

std::string ReadFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot open model file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

std::map<std::string, LinkParams> Anthropometrics(
    double height, double mass, const AnthropometricTable& table) {
  if (!(height > 0.0) || !(mass > 0.0)) {
    throw Error(ErrorKind::kConfig, "height and mass must be positive");
  }
  std::map<std::string, LinkParams> out;
  for (const char* name : {"torso", "thigh", "shank", "foot"}) {
    const auto it = table.segments.find(name);
    if (it == table.segments.end()) {
      throw Error(ErrorKind::kConfig,
                  std::string("anthropometric table lacks segment ") + name);
    }
    const SegmentFractions& f = it->second;
    CheckFraction(f.mass, std::string(name) + ".mass");
    CheckFraction(f.length, std::string(name) + ".length");
    CheckFraction(f.com, std::string(name) + ".com");
    CheckFraction(f.gyration, std::string(name) + ".gyration");
    LinkParams p;
    p.mass = f.mass * mass;
    p.length = f.length * height;
    p.com_offset = f.com * p.length;
    const double r = f.gyration * p.length;
    p.inertia = p.mass * r * r;
    out[name] = p;
  }
  return out;
}

AmputeeConfig ParseAmputeeConfig(const std::string& text) {
  const YAML::Node root = LoadBody(text);
  if (!root.IsMap()) throw Error(ErrorKind::kSchema, "model file body must be a map");
  AmputeeConfig c;
  if (root["name"]) c.name = root["name"].as<std::string>();
  const YAML::Node subject = Require(root, "subject", "model");
  c.height = Number(Require(subject, "height", "subject"), "subject.height");
  c.mass = Number(Require(subject, "mass", "subject"), "subject.mass");
  c.gravity = NumberOr(root, "gravity", c.gravity, "model");
  c.mass_delta = NumberOr(root, "mass_delta", 0.0, "model");
  c.human_ratio = NumberOr(root, "human_gear_ratio", 1.0, "model");
  if (!(c.height > 0.0) || !(c.mass > 0.0)) {
    throw Error(ErrorKind::kConfig, "subject height and mass must be positive");
  }
  if (!(c.human_ratio > 0.0)) {
    throw Error(ErrorKind::kConfig, "human_gear_ratio must be positive");
  }

  const YAML::Node table = Require(root, "anthropometrics", "model");
  for (const char* seg : {"torso", "thigh", "shank", "foot"}) {
    const std::string where = std::string("anthropometrics.") + seg;
    const YAML::Node s = Require(table, seg, "anthropometrics");
    SegmentFractions f;
    f.mass = Number(Require(s, "mass", where), where + ".mass");
    f.length = Number(Require(s, "length", where), where + ".length");
    f.com = Number(Require(s, "com", where), where + ".com");
    f.gyration = Number(Require(s, "gyration", where), where + ".gyration");
    c.table.segments[seg] = f;
  }

  if (root["residual_limb"]) {
    const YAML::Node r = root["residual_limb"];
    c.residual.length_fraction =
        NumberOr(r, "length_fraction", c.residual.length_fraction, "residual_limb");
    c.residual.mass_fraction =
        NumberOr(r, "mass_fraction", c.residual.mass_fraction, "residual_limb");
    c.residual.com = NumberOr(r, "com", c.residual.com, "residual_limb");
    c.residual.gyration = NumberOr(r, "gyration", c.residual.gyration, "residual_limb");
  }
  CheckFraction(c.residual.length_fraction, "residual_limb.length_fraction");
  CheckFraction(c.residual.mass_fraction, "residual_limb.mass_fraction");
  CheckFraction(c.residual.com, "residual_limb.com");
  CheckFraction(c.residual.gyration, "residual_limb.gyration");

  const YAML::Node p = Require(root, "prosthesis", "model");
  c.prosthesis.socket = ParsePart(Require(p, "socket", "prosthesis"), "prosthesis.socket");
  c.prosthesis.shank = ParsePart(Require(p, "shank", "prosthesis"), "prosthesis.shank");
  c.prosthesis.foot = ParsePart(Require(p, "foot", "prosthesis"), "prosthesis.foot");
  c.prosthesis.knee_ratio = NumberOr(p, "knee_ratio", c.prosthesis.knee_ratio, "prosthesis");
  c.prosthesis.ankle_ratio =
      NumberOr(p, "ankle_ratio", c.prosthesis.ankle_ratio, "prosthesis");
  if (!(c.prosthesis.knee_ratio > 0.0) || !(c.prosthesis.ankle_ratio > 0.0)) {
    throw Error(ErrorKind::kConfig, "prosthesis gear ratios must be positive");
  }
  return c;
}

AmputeeConfig LoadAmputeeConfig(const std::string& path) {
  return ParseAmputeeConfig(ReadFile(path));
}

RobotModel ParseRobotModel(const std::string& text) {
  const YAML::Node root = LoadBody(text);
  const double gravity = NumberOr(root, "gravity", 9.81, "model");
  const YAML::Node bodies = Require(root, "bodies", "model");
  if (!bodies.IsSequence() || bodies.size() == 0) {
    throw Error(ErrorKind::kSchema, "bodies must be a non-empty list");
  }
  std::vector<BodySpec> specs;
  std::map<std::string, int> index;
  std::vector<int> coord;
  int dof = 0;
  for (size_t i = 0; i < bodies.size(); ++i) {
    const YAML::Node b = bodies[i];
    const std::string where = "bodies[" + std::to_string(i) + "]";
    BodySpec s;
    s.name = Require(b, "name", where).as<std::string>();
    const std::string joint = Require(b, "joint", where).as<std::string>();
    if (joint == "planar") {
      s.joint = JointKind::kPlanarBase;
    } else if (joint == "revolute") {
      s.joint = JointKind::kRevolute;
    } else if (joint == "fixed3dof") {
      s.joint = JointKind::kFixed3Dof;
    } else {
      throw Error(ErrorKind::kSchema, where + ": unknown joint '" + joint + "'");
    }
    if (b["parent"] && !b["parent"].IsNull()) {
      const std::string parent = b["parent"].as<std::string>();
      const auto it = index.find(parent);
      if (it == index.end()) {
        throw Error(ErrorKind::kConfig, where + ": parent '" + parent +
                                            "' must be listed before its child");
      }
      s.parent = it->second;
    }
    s.link.mass = Number(Require(b, "mass", where), where + ".mass");
    s.link.length = Number(Require(b, "length", where), where + ".length");
    s.link.com_offset = Number(Require(b, "com", where), where + ".com");
    s.link.inertia = NumberOr(b, "inertia", 0.0, where);
    s.attach = NumberOr(b, "attach", 0.0, where);
    s.axis_offset = NumberOr(b, "axis_offset", 0.0, where);
    index[s.name] = static_cast<int>(i);
    coord.push_back(dof);
    dof += JointDofs(s.joint);
    specs.push_back(std::move(s));
  }
  std::vector<std::pair<int, double>> act;
  if (root["actuation"]) {
    for (const YAML::Node& a : root["actuation"]) {
      const std::string body = Require(a, "body", "actuation").as<std::string>();
      const auto it = index.find(body);
      if (it == index.end()) {
        throw Error(ErrorKind::kConfig, "actuation: unknown body '" + body + "'");
      }
      if (specs[it->second].joint != JointKind::kRevolute) {
        throw Error(ErrorKind::kConfig, "actuation: only revolute joints are actuated");
      }
      act.emplace_back(coord[it->second], NumberOr(a, "ratio", 1.0, "actuation"));
    }
  }
  MatrixXd bmat = MatrixXd::Zero(dof, static_cast<int>(act.size()));
  for (size_t j = 0; j < act.size(); ++j) bmat(act[j].first, j) = act[j].second;
  std::vector<FrameSpec> frames;
  if (root["frames"]) {
    for (const YAML::Node& f : root["frames"]) {
      FrameSpec fs;
      fs.name = Require(f, "name", "frames").as<std::string>();
      const std::string body = Require(f, "body", "frames").as<std::string>();
      const auto it = index.find(body);
      if (it == index.end()) {
        throw Error(ErrorKind::kConfig, "frames: unknown body '" + body + "'");
      }
      fs.body = it->second;
      const YAML::Node off = Require(f, "offset", "frames");
      if (!off.IsSequence() || off.size() != 2) {
        throw Error(ErrorKind::kSchema, "frames: offset must be [x, z]");
      }
      fs.offset = Vector2d(Number(off[0], "offset"), Number(off[1], "offset"));
      frames.push_back(fs);
    }
  }
  try {
    return RobotModel(std::move(specs), bmat, gravity, std::move(frames));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kSchema) throw;
    throw Error(ErrorKind::kConfig, e.what());
  }
}

}  // namespace sepsim
