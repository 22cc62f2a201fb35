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

#include <fstream>
#include <sstream>
#include <string>

#include <yaml-cpp/yaml.h>

#include "sepsim/gait.hpp"

namespace sepsim {
namespace {

constexpr char kHeader[] = "sepsim-gait v1";

YAML::Node Require(const YAML::Node& node, const std::string& key,
                   const std::string& where) {
  if (!node[key]) {
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

VertexGait ParseVertex(const YAML::Node& node, const std::string& name) {
  VertexGait g;
  g.v_hip = Number(Require(node, "v_hip", name), name + ".v_hip");
  g.dp_plus = Number(Require(node, "dp_plus", name), name + ".dp_plus");
  g.dp_minus = Number(Require(node, "dp_minus", name), name + ".dp_minus");
  if (g.dp_plus == g.dp_minus) {
    throw Error(ErrorKind::kConfig, name + ": dp_plus must differ from dp_minus");
  }
  const YAML::Node alpha = Require(node, "alpha", name);
  if (!alpha.IsSequence() || alpha.size() != kNumDegreeTwo) {
    throw Error(ErrorKind::kSchema, name + ".alpha must have 5 rows");
  }
  for (int i = 0; i < kNumDegreeTwo; ++i) {
    if (!alpha[i].IsSequence() || alpha[i].size() != kNumCoeffs) {
      throw Error(ErrorKind::kSchema, name + ".alpha rows need 7 coefficients");
    }
    for (int k = 0; k < kNumCoeffs; ++k) {
      g.alpha(i, k) = Number(alpha[i][k], name + ".alpha");
    }
  }
  return g;
}

void EmitVertex(YAML::Emitter& out, const VertexGait& g) {
  out << YAML::BeginMap;
  out << YAML::Key << "v_hip" << YAML::Value << g.v_hip;
  out << YAML::Key << "dp_plus" << YAML::Value << g.dp_plus;
  out << YAML::Key << "dp_minus" << YAML::Value << g.dp_minus;
  out << YAML::Key << "alpha" << YAML::Value << YAML::BeginSeq;
  for (int i = 0; i < kNumDegreeTwo; ++i) {
    out << YAML::Flow << YAML::BeginSeq;
    for (int k = 0; k < kNumCoeffs; ++k) out << g.alpha(i, k);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq << YAML::EndMap;
}

}  // namespace

GaitParams ParseGait(const std::string& text) {
  std::istringstream in(text);
  std::string first;
  std::getline(in, first);
  if (!first.empty() && first.back() == '\r') first.pop_back();
  if (first != kHeader) {
    throw Error(ErrorKind::kSchema,
                "gait file must start with '" + std::string(kHeader) + "'");
  }
  YAML::Node root;
  try {
    root = YAML::Load(in);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::kSchema, std::string("gait file: ") + e.what());
  }
  GaitParams g;
  g.pt = ParseVertex(Require(root, "pt", "gait"), "pt");
  g.pw = ParseVertex(Require(root, "pw", "gait"), "pw");
  if (root["gains"]) {
    const YAML::Node k = root["gains"];
    if (k["kp"]) g.gains.kp = Number(k["kp"], "gains.kp");
    if (k["kd"]) g.gains.kd = Number(k["kd"], "gains.kd");
    if (k["k_hip"]) g.gains.k_hip = Number(k["k_hip"], "gains.k_hip");
  }
  if (!(g.gains.kp > 0 && g.gains.kd > 0 && g.gains.k_hip > 0)) {
    throw Error(ErrorKind::kConfig, "gains must be positive");
  }
  if (root["provenance"]) g.provenance = root["provenance"].as<std::string>();
  return g;
}

GaitParams LoadGait(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot open gait file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ParseGait(ss.str());
}

std::string SerializeGait(const GaitParams& g) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  if (!g.provenance.empty()) {
    out << YAML::Key << "provenance" << YAML::Value << g.provenance;
  }
  out << YAML::Key << "gains" << YAML::Value << YAML::Flow << YAML::BeginMap
      << YAML::Key << "kp" << YAML::Value << g.gains.kp << YAML::Key << "kd"
      << YAML::Value << g.gains.kd << YAML::Key << "k_hip" << YAML::Value
      << g.gains.k_hip << YAML::EndMap;
  out << YAML::Key << "pt" << YAML::Value;
  EmitVertex(out, g.pt);
  out << YAML::Key << "pw" << YAML::Value;
  EmitVertex(out, g.pw);
  out << YAML::EndMap;
  return std::string(kHeader) + "\n" + out.c_str() + "\n";
}

void SaveGait(const GaitParams& gait, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot write gait file " + path);
  f << SerializeGait(gait);
}

}  // namespace sepsim
