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
#include <string>

#include "sepsim/gait.hpp"

namespace sepsim {
namespace {

constexpr double kBinomial[kNumCoeffs] = {1, 6, 15, 20, 15, 6, 1};

double Bernstein(int n, int k, double t) {
  static constexpr double kBinom[7][7] = {
      {1}, {1, 1}, {1, 2, 1}, {1, 3, 3, 1}, {1, 4, 6, 4, 1},
      {1, 5, 10, 10, 5, 1}, {1, 6, 15, 20, 15, 6, 1}};
  return kBinom[n][k] * std::pow(t, k) * std::pow(1.0 - t, n - k);
}

}  // namespace

const char* VertexName(Vertex v) { return v == Vertex::kPt ? "pt" : "pw"; }

Vertex NextVertex(Vertex v) {
  return v == Vertex::kPt ? Vertex::kPw : Vertex::kPt;
}

double BernsteinBasis(int k, double tau) {
  return kBinomial[k] * std::pow(tau, k) * std::pow(1.0 - tau, kBezierOrder - k);
}

double BezierEval(const Eigen::Ref<const VectorXd>& alpha, double tau,
                  int order) {
  if (alpha.size() != kNumCoeffs) {
    throw Error(ErrorKind::kDimensionMismatch, "Bezier needs 7 coefficients");
  }
  if (order < 0 || order > 2) {
    throw Error(ErrorKind::kPrecondition, "Bezier derivative order must be <= 2");
  }
  if (tau < 0.0 || tau > 1.0) {
    if (order > 0) return 0.0;
    return tau < 0.0 ? alpha(0) : alpha(kBezierOrder);
  }
  double s = 0.0;
  switch (order) {
    case 0:
      for (int k = 0; k <= 6; ++k) s += alpha(k) * Bernstein(6, k, tau);
      return s;
    case 1:
      for (int k = 0; k <= 5; ++k) {
        s += (alpha(k + 1) - alpha(k)) * Bernstein(5, k, tau);
      }
      return 6.0 * s;
    default:
      for (int k = 0; k <= 4; ++k) {
        s += (alpha(k + 2) - 2.0 * alpha(k + 1) + alpha(k)) *
             Bernstein(4, k, tau);
      }
      return 30.0 * s;
  }
}

OutputMaps MakeOutputMaps(const RoleMap& r, int eta) {
  const int idx[] = {r.sh, r.sk, r.sa, r.nsh, r.nsk, r.nsa};
  for (int i : idx) {
    if (i < 0 || i >= eta) {
      throw Error(ErrorKind::kConfig, "role map index out of range");
    }
  }
  OutputMaps m;
  m.hip_row = VectorXd::Zero(eta);
  // Foot fixed: the ankle swings the whole leg, the knee only the thigh.
  m.hip_row(r.sk) = r.r_sk;
  m.hip_row(r.sa) = r.r_sk + r.r_sa;
  m.c2 = MatrixXd::Zero(kNumDegreeTwo, eta);
  m.c2(0, r.sk) = -1.0;  // stance calf
  m.c2(0, r.sa) = -1.0;
  m.c2(1, r.sh) = -1.0;  // stance hip
  m.c2(2, r.nsh) = -1.0;
  m.c2(3, r.nsk) = 1.0;
  m.c2(4, r.nsa) = 1.0;
  return m;
}

double HipPosition(const OutputMaps& maps, const VectorXd& theta) {
  return maps.hip_row.dot(theta);
}

VectorXd PhaseGradient(const OutputMaps& maps, const VertexGait& gait) {
  const double span = gait.dp_minus - gait.dp_plus;
  if (!(std::abs(span) > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "degenerate phase bounds");
  }
  return maps.hip_row / span;
}

TimePhase PhaseVariable(const OutputMaps& maps, const VertexGait& gait,
                        const VectorXd& theta, const VectorXd& theta_dot,
                        const VectorXd& theta_ddot) {
  const VectorXd grad = PhaseGradient(maps, gait);
  TimePhase p;
  p.tau = (HipPosition(maps, theta) - gait.dp_plus) /
          (gait.dp_minus - gait.dp_plus);
  p.tau_dot = grad.dot(theta_dot);
  p.tau_ddot = theta_ddot.size() ? grad.dot(theta_ddot) : 0.0;
  return p;
}

ActualOutputs ComputeActualOutputs(const OutputMaps& maps,
                                   const VectorXd& theta,
                                   const VectorXd& theta_dot) {
  return {maps.hip_row.dot(theta_dot), maps.c2 * theta};
}

VectorXd DesiredDerivatives(const VertexGait& gait, const TimePhase& p) {
  VectorXd d = VectorXd::Zero(kNumOutputs);
  for (int i = 0; i < kNumDegreeTwo; ++i) {
    const auto a = gait.alpha.row(i).transpose();
    d(1 + i) = BezierEval(a, p.tau, 2) * p.tau_dot * p.tau_dot +
               BezierEval(a, p.tau, 1) * p.tau_ddot;
  }
  return d;
}

VirtualConstraints EvaluateVirtualConstraints(const OutputMaps& maps,
                                              const VertexGait& gait,
                                              const VectorXd& theta,
                                              const VectorXd& theta_dot,
                                              const TimePhase& p) {
  const ActualOutputs a = ComputeActualOutputs(maps, theta, theta_dot);
  VirtualConstraints vc;
  vc.y.resize(kNumOutputs);
  vc.y2_dot.resize(kNumDegreeTwo);
  vc.y(0) = a.y1 - gait.v_hip;
  const VectorXd y2a_dot = maps.c2 * theta_dot;
  for (int i = 0; i < kNumDegreeTwo; ++i) {
    const auto al = gait.alpha.row(i).transpose();
    vc.y(1 + i) = a.y2(i) - BezierEval(al, p.tau, 0);
    vc.y2_dot(i) = y2a_dot(i) - BezierEval(al, p.tau, 1) * p.tau_dot;
  }
  vc.desired = DesiredDerivatives(gait, p);
  return vc;
}

VertexGait BoundaryMatch(const VertexGait& gait, const OutputMaps& maps,
                         const VectorXd& theta, const VectorXd& theta_dot) {
  VertexGait out = gait;
  out.dp_plus = HipPosition(maps, theta);
  if (!(std::abs(out.dp_minus - out.dp_plus) > 0.0)) {
    throw Error(ErrorKind::kPrecondition,
                "post-impact hip position equals the end-of-step bound");
  }
  const double tau_dot = PhaseGradient(maps, out).dot(theta_dot);
  if (!(tau_dot > 0.0)) {
    throw Error(ErrorKind::kPrecondition,
                "phase not advancing after impact: tau_dot = " +
                    std::to_string(tau_dot));
  }
  const VectorXd y2a = maps.c2 * theta;
  const VectorXd y2a_dot = maps.c2 * theta_dot;
  for (int i = 0; i < kNumDegreeTwo; ++i) {
    out.alpha(i, 0) = y2a(i);
    out.alpha(i, 1) = y2a(i) + y2a_dot(i) / (kBezierOrder * tau_dot);
  }
  return out;
}

}  // namespace sepsim
