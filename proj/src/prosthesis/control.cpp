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

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "sepsim/prosthesis.hpp"

namespace sepsim {
namespace {

using L = FullModelLayout;
using A = AugmentedLayout;

constexpr int kN = L::kEta;

const std::vector<int> kAllCoords = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
const std::vector<int> kProsthesisCoords = {L::kPk, L::kPa};
const std::vector<int> kSRows = {10, 11, 22, 23};

VectorXd Select(const VectorXd& v, const std::vector<int>& idx) {
  VectorXd out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

// Subsystem coordinates and velocities from the augmented vector.
State SubsystemState(const VectorXd& X) {
  State s{VectorXd(SubsystemLayout::kEta), VectorXd(SubsystemLayout::kEta)};
  s.q << X.segment<3>(A::kBase), X(A::kXs), X(A::kXs + 1);
  s.v << X.segment<3>(A::kBaseDot), X(A::kXs + 2), X(A::kXs + 3);
  return s;
}

MatrixXd InverseMassTimesB(const RobotModel& m, const VectorXd& q) {
  return MassMatrix(m, q).llt().solve(m.actuation());
}

}  // namespace

bool IsTimePhase(Vertex v) { return v == Vertex::kPw; }

std::vector<int> SubsystemOutputIndices(Vertex v) {
  return v == Vertex::kPt ? std::vector<int>{0, 1} : std::vector<int>{4, 5};
}

AmputeeDomain::AmputeeDomain(const AmputeeSystem& sys, Vertex vertex,
                             const VertexGait& gait, const Gains& gains,
                             const Pose2& ground)
    : sys_(&sys),
      vertex_(vertex),
      gait_(gait),
      gains_(gains),
      cs_(sys.DomainConstraints(vertex, ground)),
      sub_cs_(sys.SubsystemConstraints(vertex, ground)),
      maps_(MakeOutputMaps(sys.Roles(vertex), kN)),
      tau_grad_(PhaseGradient(maps_, gait)) {}

OutputBundle AmputeeDomain::BuildOutputs(const std::vector<int>& coords,
                                         const TimePhase* external,
                                         const std::vector<int>& which) const {
  const int k = static_cast<int>(coords.size());
  const VectorXd hip = Select(maps_.hip_row, coords);
  const VectorXd tg = Select(tau_grad_, coords);
  const std::vector<int> s_idx = SubsystemOutputIndices(vertex_);
  const double dp_plus = gait_.dp_plus;
  const double span = gait_.dp_minus - gait_.dp_plus;
  const double v_hip = gait_.v_hip;
  const bool time_phase = external != nullptr;
  const TimePhase phase = time_phase ? *external : TimePhase{};

  OutputBundle out;
  for (int i : which) {
    Output o;
    o.group = std::find(s_idx.begin(), s_idx.end(), i) != s_idx.end()
                  ? OutputGroup::kS
                  : OutputGroup::kR;
    if (i == 0) {
      o.name = "hip_velocity";
      o.relative_degree = 1;
      VectorXd grad = VectorXd::Zero(2 * k);
      grad.tail(k) = hip;
      o.value = [hip, v_hip, k](const VectorXd& x) {
        return hip.dot(x.tail(k)) - v_hip;
      };
      o.gradient = [grad](const VectorXd&) { return grad; };
      o.lie_gradient = o.gradient;
      out.push_back(std::move(o));
      continue;
    }
    static const char* kNames[] = {"stance_calf", "stance_hip", "swing_hip",
                                   "swing_knee", "swing_ankle"};
    o.name = kNames[i - 1];
    o.relative_degree = 2;
    const VectorXd c = Select(VectorXd(maps_.c2.row(i - 1).transpose()), coords);
    const VectorXd alpha = gait_.alpha.row(i - 1).transpose();
    if (time_phase) {
      VectorXd grad = VectorXd::Zero(2 * k), lie = VectorXd::Zero(2 * k);
      grad.head(k) = c;
      lie.tail(k) = c;
      o.value = [c, alpha, phase, k](const VectorXd& x) {
        return c.dot(x.head(k)) - BezierEval(alpha, phase.tau, 0);
      };
      o.gradient = [grad](const VectorXd&) { return grad; };
      o.lie_gradient = [lie](const VectorXd&) { return lie; };
    } else {
      auto tau = [hip, dp_plus, span, k](const VectorXd& x) {
        return (hip.dot(x.head(k)) - dp_plus) / span;
      };
      o.value = [c, alpha, tau, k](const VectorXd& x) {
        return c.dot(x.head(k)) - BezierEval(alpha, tau(x), 0);
      };
      o.gradient = [c, alpha, tau, tg, k](const VectorXd& x) {
        VectorXd g = VectorXd::Zero(2 * k);
        g.head(k) = c - BezierEval(alpha, tau(x), 1) * tg;
        return g;
      };
      o.lie_gradient = [c, alpha, tau, tg, k](const VectorXd& x) {
        const double t = tau(x);
        VectorXd g(2 * k);
        g.head(k) = -BezierEval(alpha, t, 2) * tg.dot(x.tail(k)) * tg;
        g.tail(k) = c - BezierEval(alpha, t, 1) * tg;
        return g;
      };
    }
    out.push_back(std::move(o));
  }
  return out;
}

OutputBundle AmputeeDomain::Outputs(const TimePhase* external) const {
  return BuildOutputs(kAllCoords, external, {0, 1, 2, 3, 4, 5});
}

OutputBundle AmputeeDomain::SubsystemOutputs(const TimePhase* external) const {
  return BuildOutputs(kProsthesisCoords, external, SubsystemOutputIndices(vertex_));
}

OutputBundle AmputeeDomain::FullSubsystemOutputs(const TimePhase* external) const {
  return BuildOutputs(kAllCoords, external, SubsystemOutputIndices(vertex_));
}

namespace {

// mu for the outputs `which` given local positions/velocities.
VectorXd PdLaw(const OutputBundle& outputs, const VectorXd& x, const Gains& k) {
  VectorXd mu(outputs.size());
  const int n = static_cast<int>(x.size()) / 2;
  for (size_t i = 0; i < outputs.size(); ++i) {
    const Output& o = outputs[i];
    const double y = o.value(x);
    if (o.relative_degree == 1) {
      mu(i) = -k.k_hip * y;
    } else {
      // ydot = dy/dq . qdot.
      const double yd = o.gradient(x).head(n).dot(x.tail(n));
      mu(i) = -k.kp * y - k.kd * yd;
    }
  }
  return mu;
}

}  // namespace

VectorXd AmputeeDomain::Mu(const VectorXd& x, const TimePhase& phase) const {
  const OutputBundle out = Outputs(IsTimePhase(vertex_) ? &phase : nullptr);
  VectorXd mu = PdLaw(out, x, gains_);
  if (IsTimePhase(vertex_)) {
    // Time phase: ydot also carries -b'(tau) tau_dot.
    for (int i = 1; i < kNumOutputs; ++i) {
      mu(i) += gains_.kd * BezierEval(gait_.alpha.row(i - 1).transpose(), phase.tau, 1) *
               phase.tau_dot;
    }
  }
  return mu;
}

VectorXd AmputeeDomain::SubsystemMu(const VectorXd& xs, const TimePhase& phase) const {
  const OutputBundle out = SubsystemOutputs(IsTimePhase(vertex_) ? &phase : nullptr);
  VectorXd mu = PdLaw(out, xs, gains_);
  if (IsTimePhase(vertex_)) {
    const std::vector<int> idx = SubsystemOutputIndices(vertex_);
    for (size_t j = 0; j < idx.size(); ++j) {
      mu(j) += gains_.kd *
               BezierEval(gait_.alpha.row(idx[j] - 1).transpose(), phase.tau, 1) *
               phase.tau_dot;
    }
  }
  return mu;
}

VectorXd AmputeeDomain::SubsystemFeedforward(const TimePhase& phase) const {
  if (!IsTimePhase(vertex_)) return VectorXd::Zero(2);
  return Select(DesiredDerivatives(gait_, phase), SubsystemOutputIndices(vertex_));
}

TimePhase AmputeeDomain::StatePhase(const State& x, const VectorXd& qdd) const {
  return PhaseVariable(maps_, gait_, x.q, x.v, qdd);
}

TimePhase AmputeeDomain::SubsystemPhase(const VectorXd& xs,
                                        const TimePhase* external) const {
  if (IsTimePhase(vertex_)) {
    if (external == nullptr) {
      throw Error(ErrorKind::kPrecondition, "time-phase domain needs an external phase");
    }
    return *external;
  }
  const VectorXd hip = Select(maps_.hip_row, kProsthesisCoords);
  const VectorXd tg = Select(tau_grad_, kProsthesisCoords);
  TimePhase p;
  p.tau = (hip.dot(xs.head(2)) - gait_.dp_plus) / (gait_.dp_minus - gait_.dp_plus);
  p.tau_dot = tg.dot(xs.tail(2));
  return p;
}

AffineSystem AmputeeDomain::ConstrainedSystem() const {
  AffineSystem s;
  s.n = 2 * kN;
  s.m = L::kInputs;
  const RobotModel* m = &sys_->full();
  const ConstraintSet cs = cs_;
  s.drift = [m, cs](const VectorXd& x) {
    const State st = Split(x, kN);
    VectorXd f(2 * kN);
    f << st.v, ConstrainedAffineDynamics(*m, cs, st.q, st.v).drift;
    return f;
  };
  s.control = [m, cs](const VectorXd& x) {
    const State st = Split(x, kN);
    MatrixXd g = MatrixXd::Zero(2 * kN, L::kInputs);
    g.bottomRows(kN) = ConstrainedAffineDynamics(*m, cs, st.q, st.v).input;
    return g;
  };
  return s;
}

AffineSystem AmputeeDomain::SeparableSystem(
    std::function<VectorXd(const VectorXd&)> applied_u) const {
  AffineSystem s;
  s.n = 2 * kN;
  s.m = L::kInputs;
  const RobotModel* m = &sys_->full();
  const ConstraintSet cs = cs_;
  s.drift = [m, cs, applied_u](const VectorXd& x) {
    const State st = Split(x, kN);
    const VectorXd u = applied_u(x);
    const VectorXd F = ComputeConstraintWrench(*m, cs, st.q, st.v, u).force;
    const MatrixXd J = EvaluateConstraints(*m, cs, st.q, st.v).jacobian;
    const VectorXd acc = ForwardDynamics(*m, {}, st.q, st.v,
                                         VectorXd::Zero(L::kInputs),
                                         J.transpose() * F);
    VectorXd f(2 * kN);
    f << st.v, acc;
    return f;
  };
  s.control = [m](const VectorXd& x) {
    MatrixXd g = MatrixXd::Zero(2 * kN, L::kInputs);
    g.bottomRows(kN) = InverseMassTimesB(*m, x.head(kN));
    return g;
  };
  return s;
}

FullControl AmputeeDomain::Control(const State& x) const {
  const RobotModel& m = sys_->full();
  const AffineAcceleration a = ConstrainedAffineDynamics(m, cs_, x.q, x.v);
  const VectorXd xx = Stack(x);
  VectorXd f(2 * kN);
  f << x.v, a.drift;
  MatrixXd g = MatrixXd::Zero(2 * kN, L::kInputs);
  g.bottomRows(kN) = a.input;
  const AffineSystem frozen{2 * kN, L::kInputs,
                            [&f](const VectorXd&) { return f; },
                            [&g](const VectorXd&) { return g; }};

  FullControl out;
  out.phase = StatePhase(x);
  const bool tp = IsTimePhase(vertex_);
  const OutputBundle outputs = Outputs(tp ? &out.phase : nullptr);
  const IoDynamics io = ComputeIoDynamics(frozen, outputs, xx);
  const VectorXd mu = Mu(xx, out.phase);
  if (!tp) {
    out.u = SolveDecoupled(io, mu);
  } else {
    // The feedforward is affine in tau_ddot, and tau_ddot = c . qdd(u) with u
    // affine in the feedforward: solve the scalar fixed point.
    TimePhase p0 = out.phase, p1 = out.phase;
    p0.tau_ddot = 0.0;
    p1.tau_ddot = 1.0;
    const VectorXd u0 = SolveDecoupled(io, mu, DesiredDerivatives(gait_, p0));
    const VectorXd du = SolveDecoupled(io, mu, DesiredDerivatives(gait_, p1)) - u0;
    const double num = tau_grad_.dot(a.drift + a.input * u0);
    const double den = 1.0 - tau_grad_.dot(a.input * du);
    if (!(std::abs(den) > 1e-12)) {
      throw Error(ErrorKind::kSingularDecoupling, "phase acceleration loop is singular");
    }
    out.phase.tau_ddot = num / den;
    out.u = u0 + du * out.phase.tau_ddot;
  }
  out.qdd = a.drift + a.input * out.u;
  out.wrench = a.wrench.Evaluate(out.u);
  if (!tp) out.phase.tau_ddot = tau_grad_.dot(out.qdd);
  out.y.resize(kNumOutputs);
  out.y_dot = VectorXd::Zero(kNumOutputs);
  for (int i = 0; i < kNumOutputs; ++i) {
    out.y(i) = outputs[i].value(xx);
    if (i > 0) {
      out.y_dot(i) = outputs[i].gradient(xx).head(kN).dot(x.v);
      if (tp) {
        out.y_dot(i) -= BezierEval(gait_.alpha.row(i - 1).transpose(), out.phase.tau, 1) *
                        out.phase.tau_dot;
      }
    }
  }
  return out;
}

VectorXd AmputeeDomain::TimeControl(const State& x, const TimePhase& phase) const {
  if (!IsTimePhase(vertex_)) {
    throw Error(ErrorKind::kPrecondition, "time-phase control requested in pt");
  }
  const VertexGait gait = gait_;
  return TimeVaryingControl(
      ConstrainedSystem(), Outputs(&phase), Mu(Stack(x), phase), Stack(x), phase,
      [gait](const VectorXd&, const TimePhase& p) { return DesiredDerivatives(gait, p); });
}

SubsystemView AmputeeDomain::FullSubsystemView(
    std::function<VectorXd(const VectorXd&)> applied_u) const {
  const AffineSystem sep = SeparableSystem(std::move(applied_u));
  SubsystemView v;
  v.n_s = 4;
  v.m_s = 2;
  v.local_state = [](const VectorXd& x) { return Select(x, kSRows); };
  v.drift = [sep](const VectorXd& x) { return Select(sep.drift(x), kSRows); };
  v.control = [sep](const VectorXd& x) {
    const MatrixXd g = sep.control(x);
    MatrixXd out(4, 2);
    for (int i = 0; i < 4; ++i) {
      out(i, 0) = g(kSRows[i], L::kUPk);
      out(i, 1) = g(kSRows[i], L::kUPa);
    }
    return out;
  };
  return v;
}

std::function<VectorXd(const VectorXd&)> AmputeeDomain::EmbeddedSubsystemDrift(
    std::function<VectorXd(const VectorXd&)> applied_u) const {
  const AffineSystem sep = SeparableSystem(std::move(applied_u));
  return [sep](const VectorXd& x) {
    const VectorXd f = sep.drift(x);
    VectorXd out = VectorXd::Zero(2 * kN);
    for (int i : kSRows) out(i) = f(i);
    return out;
  };
}

VectorXd AmputeeDomain::SscControl(const State& x, const VectorXd& u_applied,
                                   const TimePhase& phase) const {
  const VectorXd xx = Stack(x);
  const VectorXd xs = Select(xx, kSRows);
  const bool tp = IsTimePhase(vertex_);
  const TimePhase p = tp ? phase : SubsystemPhase(xs, nullptr);
  return SubsystemControlLaw(
      FullSubsystemView([u_applied](const VectorXd&) { return u_applied; }),
      SubsystemOutputs(tp ? &p : nullptr), SubsystemMu(xs, p), xx,
      SubsystemFeedforward(p));
}

SubsystemView AmputeeDomain::AugmentedView() const {
  const RobotModel* m = &sys_->subsystem();
  const ConstraintSet cs = sub_cs_;
  auto dyn = [m, cs](const VectorXd& X) {
    const State s = SubsystemState(X);
    const VectorXd ext = SocketGeneralizedForce(X.segment<3>(A::kBase),
                                                X.segment<3>(A::kWrench));
    return ConstrainedAffineDynamics(*m, cs, s.q, s.v, ext);
  };
  SubsystemView v;
  v.n_s = 4;
  v.m_s = 2;
  v.local_state = [](const VectorXd& X) { return VectorXd(X.segment<4>(A::kXs)); };
  v.drift = [dyn](const VectorXd& X) {
    const AffineAcceleration a = dyn(X);
    VectorXd f(4);
    f << X(A::kXs + 2), X(A::kXs + 3), a.drift(SubsystemLayout::kPk),
        a.drift(SubsystemLayout::kPa);
    return f;
  };
  v.control = [dyn](const VectorXd& X) {
    const AffineAcceleration a = dyn(X);
    MatrixXd g = MatrixXd::Zero(4, 2);
    g.bottomRows(2) = a.input.bottomRows(2);
    return g;
  };
  return v;
}

SubsystemView AmputeeDomain::AugmentedSeparableView(
    std::function<VectorXd(const VectorXd&)> applied_us) const {
  const RobotModel* m = &sys_->subsystem();
  const ConstraintSet cs = sub_cs_;
  SubsystemView v;
  v.n_s = 4;
  v.m_s = 2;
  v.local_state = [](const VectorXd& X) { return VectorXd(X.segment<4>(A::kXs)); };
  v.drift = [m, cs, applied_us](const VectorXd& X) {
    const State s = SubsystemState(X);
    VectorXd ext = SocketGeneralizedForce(X.segment<3>(A::kBase),
                                          X.segment<3>(A::kWrench));
    if (!cs.empty()) {
      const VectorXd F = ComputeConstraintWrench(*m, cs, s.q, s.v, applied_us(X), ext).force;
      ext += EvaluateConstraints(*m, cs, s.q, s.v).jacobian.transpose() * F;
    }
    const VectorXd acc = ForwardDynamics(*m, {}, s.q, s.v, VectorXd::Zero(2), ext);
    VectorXd f(4);
    f << X(A::kXs + 2), X(A::kXs + 3), acc(SubsystemLayout::kPk), acc(SubsystemLayout::kPa);
    return f;
  };
  v.control = [m](const VectorXd& X) {
    const MatrixXd dib = InverseMassTimesB(*m, SubsystemState(X).q);
    MatrixXd g = MatrixXd::Zero(4, 2);
    g.bottomRows(2) = dib.bottomRows(2);
    return g;
  };
  return v;
}

VectorXd AmputeeDomain::SubsystemControl(const VectorXd& X,
                                         const TimePhase* external) const {
  if (X.size() != A::kSize) {
    throw Error(ErrorKind::kDimensionMismatch, "augmented vector size");
  }
  const VectorXd xs = X.segment<4>(A::kXs);
  const TimePhase p = SubsystemPhase(xs, external);
  const bool tp = IsTimePhase(vertex_);
  return SubsystemControlLaw(AugmentedView(), SubsystemOutputs(tp ? &p : nullptr),
                             SubsystemMu(xs, p), X, SubsystemFeedforward(p));
}

Eigen::Vector2d AmputeeDomain::SubsystemAcceleration(const VectorXd& X,
                                                     const VectorXd& us) const {
  const State s = SubsystemState(X);
  const VectorXd ext =
      SocketGeneralizedForce(X.segment<3>(A::kBase), X.segment<3>(A::kWrench));
  const AffineAcceleration a =
      ConstrainedAffineDynamics(sys_->subsystem(), sub_cs_, s.q, s.v, ext);
  const VectorXd qdd = a.drift + a.input * us;
  return {qdd(SubsystemLayout::kPk), qdd(SubsystemLayout::kPa)};
}

}  // namespace sepsim
