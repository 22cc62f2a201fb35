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
#include <numbers>
#include <utility>
#include <variant>

#include "sepsim/prosthesis.hpp"

namespace sepsim {
namespace {

using L = FullModelLayout;

LinkParams Part(const PartSpec& p, double length) {
  LinkParams l;
  l.mass = p.mass;
  l.length = length;
  l.com_offset = p.com * length;
  const double r = p.gyration * length;
  l.inertia = p.mass * r * r;
  return l;
}

LinkParams Scaled(LinkParams l, double s) {
  l.mass *= s;
  l.inertia *= s;
  return l;
}

}  // namespace

AmputeeSystem::AmputeeSystem(const AmputeeConfig& config) : config_(config) {
  std::map<std::string, LinkParams> seg =
      Anthropometrics(config.height, config.mass, config.table);
  const LinkParams& thigh = seg.at("thigh");
  LinkParams residual;
  residual.length = config.residual.length_fraction * thigh.length;
  residual.mass = config.residual.mass_fraction * thigh.mass;
  residual.com_offset = config.residual.com * residual.length;
  const double rg = config.residual.gyration * residual.length;
  residual.inertia = residual.mass * rg * rg;
  seg["residual"] = residual;

  double human = 0.0;
  for (const char* s : {"torso", "thigh", "shank", "foot", "residual"}) {
    human += seg.at(s).mass;
  }
  if (!(human + config.mass_delta > 0.0)) {
    throw Error(ErrorKind::kConfig,
                "mass_delta drives the human segment mass to zero or below");
  }
  const double scale = (human + config.mass_delta) / human;
  for (auto& [name, link] : seg) link = Scaled(link, scale);
  human_ = seg;

  const ProsthesisSpec& ps = config.prosthesis;
  const double socket_len = thigh.length - residual.length;
  const double shank_len = ps.shank.length > 0.0 ? ps.shank.length : seg.at("shank").length;
  const double foot_len = ps.foot.length > 0.0 ? ps.foot.length : seg.at("foot").length;
  const double half_pi = std::numbers::pi / 2.0;

  std::vector<BodySpec> b(8);
  b[0] = {"torso", seg.at("torso"), JointKind::kPlanarBase, -1, 0.0, std::numbers::pi};
  b[1] = {"left_thigh", seg.at("thigh"), JointKind::kRevolute, 0, 0.0};
  b[2] = {"left_shank", seg.at("shank"), JointKind::kRevolute, 1, thigh.length};
  b[3] = {"left_foot", seg.at("foot"), JointKind::kRevolute, 2, seg.at("shank").length,
          half_pi};
  b[4] = {"right_thigh", seg.at("residual"), JointKind::kRevolute, 0, 0.0};
  b[5] = {"socket", Part(ps.socket, socket_len), JointKind::kFixed3Dof, 4,
          residual.length};
  b[6] = {"prosthesis_shank", Part(ps.shank, shank_len), JointKind::kRevolute, 5,
          socket_len};
  b[7] = {"prosthesis_foot", Part(ps.foot, foot_len), JointKind::kRevolute, 6,
          shank_len, half_pi};

  MatrixXd bmat = MatrixXd::Zero(L::kEta, L::kInputs);
  bmat(L::kLh, 0) = config.human_ratio;
  bmat(L::kLk, 1) = config.human_ratio;
  bmat(L::kLa, 2) = config.human_ratio;
  bmat(L::kRh, 3) = config.human_ratio;
  bmat(L::kPk, 4) = ps.knee_ratio;
  bmat(L::kPa, 5) = ps.ankle_ratio;
  full_ = std::make_unique<RobotModel>(
      b, bmat, config.gravity,
      std::vector<FrameSpec>{{"socket_mount", 4, Vector2d(0.0, -residual.length)}});
  if (full_->dof() != L::kEta) {
    throw Error(ErrorKind::kConfig, "amputee model layout mismatch");
  }

  layout_.socket = full_->frame("socket");
  layout_.socket_mount = full_->frame("socket_mount");
  layout_.left_foot = full_->frame("left_foot");
  layout_.prosthesis_foot = full_->frame("prosthesis_foot");
  layout_.torso = full_->frame("torso");
  layout_.thigh_length = thigh.length;
  layout_.shank_length = seg.at("shank").length;
  layout_.residual_length = residual.length;
  layout_.leg_length = thigh.length + seg.at("shank").length;
  layout_.human_mass = human + config.mass_delta;

  std::vector<BodySpec> s(3);
  s[0] = {"socket", Part(ps.socket, socket_len), JointKind::kPlanarBase, -1};
  s[1] = {"prosthesis_shank", Part(ps.shank, shank_len), JointKind::kRevolute, 0,
          socket_len};
  s[2] = {"prosthesis_foot", Part(ps.foot, foot_len), JointKind::kRevolute, 1,
          shank_len, half_pi};
  MatrixXd sb = MatrixXd::Zero(SubsystemLayout::kEta, 2);
  sb(SubsystemLayout::kPk, 0) = ps.knee_ratio;
  sb(SubsystemLayout::kPa, 1) = ps.ankle_ratio;
  sub_ = std::make_unique<RobotModel>(std::move(s), sb, config.gravity);
  sub_layout_.base = sub_->frame("socket");
  sub_layout_.foot = sub_->frame("prosthesis_foot");
}

FrameId AmputeeSystem::StanceFoot(Vertex v) const {
  return v == Vertex::kPt ? layout_.prosthesis_foot : layout_.left_foot;
}

FrameId AmputeeSystem::SwingFoot(Vertex v) const {
  return v == Vertex::kPt ? layout_.left_foot : layout_.prosthesis_foot;
}

ConstraintSet AmputeeSystem::DomainConstraints(Vertex v, const Pose2& ground) const {
  ConstraintSet cs;
  cs.items.push_back(FrameWeld{layout_.socket, layout_.socket_mount, Pose2{}});
  cs.items.push_back(GroundContact{StanceFoot(v), ground});
  return cs;
}

ConstraintSet AmputeeSystem::SubsystemConstraints(Vertex v, const Pose2& ground) const {
  ConstraintSet cs;
  if (v == Vertex::kPt) cs.items.push_back(GroundContact{sub_layout_.foot, ground});
  return cs;
}

RoleMap AmputeeSystem::Roles(Vertex v) const {
  RoleMap r;
  r.r_sk = layout_.thigh_length;
  if (v == Vertex::kPt) {
    r.sh = L::kRh, r.sk = L::kPk, r.sa = L::kPa;
    r.nsh = L::kLh, r.nsk = L::kLk, r.nsa = L::kLa;
    r.r_sa = sub_->body(1).link.length;
  } else {
    r.sh = L::kLh, r.sk = L::kLk, r.sa = L::kLa;
    r.nsh = L::kRh, r.nsk = L::kPk, r.nsa = L::kPa;
    r.r_sa = layout_.shank_length;
  }
  return r;
}

SeparableStructure AmputeeSystem::Structure() const {
  SeparableStructure s;
  for (int i = 0; i < L::kEta; ++i) {
    const bool prosthesis = i == L::kPk || i == L::kPa;
    (prosthesis ? s.xs : s.xr).push_back(i);
  }
  for (int i = 0; i < L::kEta; ++i) {
    const bool prosthesis = i == L::kPk || i == L::kPa;
    (prosthesis ? s.xs : s.xr).push_back(L::kEta + i);
  }
  s.ur = {0, 1, 2, 3};
  s.us = {L::kUPk, L::kUPa};
  return s;
}

RobotModel WithSpanningActuator(const RobotModel& model) {
  MatrixXd b = model.actuation();
  b(L::kFphi, 3) = -b(L::kRh, 3);
  return RobotModel(model.bodies(), b, model.gravity(),
                    {{"socket_mount", 4, Vector2d(0.0, -model.body(5).attach)}});
}

VectorXd SocketRows(const VectorXd& wrench) {
  if (wrench.size() < 3) {
    throw Error(ErrorKind::kPrecondition, "constraint wrench has no socket rows");
  }
  return wrench.head(3);
}

VectorXd Stack(const State& x) {
  VectorXd s(x.q.size() + x.v.size());
  s << x.q, x.v;
  return s;
}

State Split(const VectorXd& x, int n) {
  if (x.size() != 2 * n) throw Error(ErrorKind::kDimensionMismatch, "state size");
  return State{x.head(n), x.tail(n)};
}

VectorXd SocketGeneralizedForce(const Vector3d& base_pose, const Vector3d& wrench) {
  VectorXd f = VectorXd::Zero(SubsystemLayout::kEta);
  f.head(2) = Rotation(base_pose(2)) * wrench.head(2);
  f(2) = wrench(2);
  return f;
}

VectorXd MeasurementTransform(const AmputeeSystem& sys,
                              const ConstraintSet& constraints, const State& x,
                              const VectorXd& u, double wrench_sign) {
  if (constraints.items.empty() ||
      !std::holds_alternative<FrameWeld>(constraints.items.front())) {
    throw Error(ErrorKind::kPrecondition, "socket rows absent from constraint set");
  }
  const RobotModel& m = sys.full();
  const FrameId socket = sys.layout().socket;
  using A = AugmentedLayout;
  VectorXd out(A::kSize);
  out.segment<3>(A::kBase) = ForwardKinematics(m, socket, x.q).vec();
  out.segment<3>(A::kBaseDot) = FrameJacobian(m, socket, x.q) * x.v;
  out.segment<4>(A::kXs) << x.q(L::kPk), x.q(L::kPa), x.v(L::kPk), x.v(L::kPa);
  const ConstraintWrench w = ComputeConstraintWrench(m, constraints, x.q, x.v, u);
  out.segment<3>(A::kWrench) = wrench_sign * SocketRows(w.force);
  return out;
}

}  // namespace sepsim
