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

// Tests for Bezier trajectories, phase, outputs and gait files.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sepsim/gait.hpp"

namespace sepsim {
namespace {

VectorXd Coeffs(std::initializer_list<double> v) {
  VectorXd a(v.size());
  int i = 0;
  for (double x : v) a(i++) = x;
  return a;
}

const VectorXd kAlpha = Coeffs({0.3, -0.2, 0.5, 1.1, 0.0, -0.7, 0.4});

// Prosthesis stance: stance leg is the prosthesis (coordinates 10, 11).
RoleMap StanceRoles() { return {6, 10, 11, 3, 4, 5, 0.42, 0.40}; }
// Prosthesis swing.
RoleMap SwingRoles() { return {3, 4, 5, 6, 10, 11, 0.42, 0.40}; }

VertexGait SampleGait() {
  VertexGait g;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (int i = 0; i < kNumDegreeTwo; ++i) {
    for (int k = 0; k < kNumCoeffs; ++k) g.alpha(i, k) = d(rng);
  }
  g.v_hip = 0.3;
  g.dp_plus = -0.09;
  g.dp_minus = 0.08;
  return g;
}

TEST(BezierTest, Endpoints) {
  EXPECT_DOUBLE_EQ(BezierEval(kAlpha, 0.0, 0), kAlpha(0));
  EXPECT_DOUBLE_EQ(BezierEval(kAlpha, 1.0, 0), kAlpha(6));
}

TEST(BezierTest, ConstantCoefficients) {
  const VectorXd c = VectorXd::Constant(7, 0.8);
  for (double t : {0.0, 0.13, 0.5, 0.97, 1.0}) {
    EXPECT_NEAR(BezierEval(c, t, 0), 0.8, 1e-15);
    EXPECT_NEAR(BezierEval(c, t, 1), 0.0, 1e-14);
    EXPECT_NEAR(BezierEval(c, t, 2), 0.0, 1e-13);
  }
}

TEST(BezierTest, PartitionOfUnity) {
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    double s = 0.0;
    for (int k = 0; k < kNumCoeffs; ++k) s += BernsteinBasis(k, t);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(BezierTest, DerivativesMatchFiniteDifferences) {
  EXPECT_NEAR(BezierEval(kAlpha, 0.0, 1), 6.0 * (kAlpha(1) - kAlpha(0)), 1e-14);
  const double h = 1e-6;
  for (double t : {0.05, 0.3, 0.61, 0.95}) {
    const double d1 = (BezierEval(kAlpha, t + h, 0) - BezierEval(kAlpha, t - h, 0)) / (2 * h);
    const double d2 = (BezierEval(kAlpha, t + h, 1) - BezierEval(kAlpha, t - h, 1)) / (2 * h);
    EXPECT_NEAR(BezierEval(kAlpha, t, 1), d1, 1e-8);
    EXPECT_NEAR(BezierEval(kAlpha, t, 2), d2, 1e-8);
  }
  // One-sided at tau = 0.
  const double d0 = (BezierEval(kAlpha, h, 0) - BezierEval(kAlpha, 0.0, 0)) / h;
  EXPECT_NEAR(BezierEval(kAlpha, 0.0, 1), d0, 1e-4);
}

TEST(BezierTest, ClampedOutsideUnitInterval) {
  EXPECT_EQ(BezierEval(kAlpha, -0.3, 0), kAlpha(0));
  EXPECT_EQ(BezierEval(kAlpha, 1.4, 0), kAlpha(6));
  EXPECT_EQ(BezierEval(kAlpha, -0.3, 1), 0.0);
  EXPECT_EQ(BezierEval(kAlpha, 1.4, 2), 0.0);
  EXPECT_THROW(BezierEval(kAlpha, 0.5, 3), Error);
}

TEST(PhaseVariableTest, EndpointsAndRest) {
  const OutputMaps maps = MakeOutputMaps(StanceRoles(), 12);
  const VertexGait g = SampleGait();
  VectorXd theta = VectorXd::Zero(12);
  // Knee straight: dp = (r_sk + r_sa) * theta_sa.
  theta(11) = g.dp_plus / 0.82;
  const VectorXd z = VectorXd::Zero(12);
  EXPECT_NEAR(PhaseVariable(maps, g, theta, z, z).tau, 0.0, 1e-15);
  theta(11) = g.dp_minus / 0.82;
  const TimePhase end = PhaseVariable(maps, g, theta, z, z);
  EXPECT_NEAR(end.tau, 1.0, 1e-15);
  EXPECT_EQ(end.tau_dot, 0.0);
  EXPECT_EQ(end.tau_ddot, 0.0);
  VertexGait flat = g;
  flat.dp_minus = flat.dp_plus;
  EXPECT_THROW(PhaseVariable(maps, flat, theta, z, z), Error);
}

// Smooth joint trajectory used as a stand-in for a recorded trace.
struct Path {
  VectorXd a, w;
  VectorXd q(double t) const { return (a.array() * (w.array() * t).sin()).matrix(); }
  VectorXd qd(double t) const {
    return (a.array() * w.array() * (w.array() * t).cos()).matrix();
  }
  VectorXd qdd(double t) const {
    return (-a.array() * w.array().square() * (w.array() * t).sin()).matrix();
  }
};

Path MakePath() {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(0.1, 0.4), w(1.0, 4.0);
  Path p{VectorXd(12), VectorXd(12)};
  for (int i = 0; i < 12; ++i) {
    p.a(i) = d(rng);
    p.w(i) = w(rng);
  }
  return p;
}

TEST(PhaseVariableTest, RatesMatchTrace) {
  const OutputMaps maps = MakeOutputMaps(SwingRoles(), 12);
  const VertexGait g = SampleGait();
  const Path p = MakePath();
  const double h = 1e-5;
  for (double t : {0.1, 0.4, 0.7}) {
    const TimePhase ph = PhaseVariable(maps, g, p.q(t), p.qd(t), p.qdd(t));
    const TimePhase pp = PhaseVariable(maps, g, p.q(t + h), p.qd(t + h), p.qdd(t + h));
    const TimePhase pm = PhaseVariable(maps, g, p.q(t - h), p.qd(t - h), p.qdd(t - h));
    EXPECT_NEAR(ph.tau_dot, (pp.tau - pm.tau) / (2 * h), 1e-6);
    EXPECT_NEAR(ph.tau_ddot, (pp.tau_dot - pm.tau_dot) / (2 * h), 1e-6);
  }
}

TEST(OutputsTest, ZeroStateAndHipVelocity) {
  const OutputMaps maps = MakeOutputMaps(StanceRoles(), 12);
  const VectorXd z = VectorXd::Zero(12);
  const ActualOutputs a = ComputeActualOutputs(maps, z, z);
  EXPECT_EQ(a.y1, 0.0);
  EXPECT_EQ(a.y2.cwiseAbs().maxCoeff(), 0.0);
  VectorXd v = z;
  v(10) = 1.0;  // stance knee rate
  EXPECT_DOUBLE_EQ(ComputeActualOutputs(maps, z, v).y1, 0.42);
  v(10) = 0.0;
  v(11) = 1.0;  // stance ankle rate
  EXPECT_DOUBLE_EQ(ComputeActualOutputs(maps, z, v).y1, 0.42 + 0.40);
}

TEST(OutputsTest, SignConventions) {
  const OutputMaps maps = MakeOutputMaps(StanceRoles(), 12);
  VectorXd th = VectorXd::Zero(12);
  th(10) = 0.1;   // sk
  th(11) = 0.2;   // sa
  th(6) = 0.3;    // sh
  th(3) = 0.4;    // nsh
  th(4) = 0.5;    // nsk
  th(5) = 0.6;    // nsa
  const VectorXd y2 = ComputeActualOutputs(maps, th, VectorXd::Zero(12)).y2;
  EXPECT_DOUBLE_EQ(y2(0), -0.3);
  EXPECT_DOUBLE_EQ(y2(1), -0.3);
  EXPECT_DOUBLE_EQ(y2(2), -0.4);
  EXPECT_DOUBLE_EQ(y2(3), 0.5);
  EXPECT_DOUBLE_EQ(y2(4), 0.6);
}

TEST(OutputsTest, SwingProsthesisOutputsReadOnlyProsthesis) {
  const OutputMaps maps = MakeOutputMaps(SwingRoles(), 12);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-1, 1);
  VectorXd th(12);
  for (int i = 0; i < 12; ++i) th(i) = d(rng);
  const VectorXd base = ComputeActualOutputs(maps, th, th).y2;
  for (int i = 0; i < 10; ++i) {
    VectorXd p = th;
    p(i) += 0.37;
    const VectorXd y = ComputeActualOutputs(maps, p, p).y2;
    EXPECT_EQ(y(3), base(3));
    EXPECT_EQ(y(4), base(4));
  }
}

TEST(VirtualConstraintsTest, ExactTrackingAndConstantDesired) {
  const OutputMaps maps = MakeOutputMaps(SwingRoles(), 12);
  VertexGait g = SampleGait();
  g.alpha = MatrixXd::Constant(5, 7, 0.2);
  VectorXd th = VectorXd::Zero(12);
  th(4) = -0.2;  // sc = -sk - sa = 0.2
  th(3) = -0.2;  // sh
  th(6) = -0.2;  // nsh
  th(10) = 0.2;
  th(11) = 0.2;
  const VirtualConstraints vc =
      EvaluateVirtualConstraints(maps, g, th, VectorXd::Zero(12), {0.4, 1.3, -2.0});
  EXPECT_LE(vc.y.tail(5).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(vc.desired.cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_DOUBLE_EQ(vc.y(0), -g.v_hip);
}

TEST(VirtualConstraintsTest, DesiredPackMatchesTrace) {
  const OutputMaps maps = MakeOutputMaps(SwingRoles(), 12);
  VertexGait g = SampleGait();
  // Keep tau inside (0, 1) along the path.
  g.dp_plus = -5.0;
  g.dp_minus = 5.0;
  const Path p = MakePath();
  auto desired = [&](double t) {
    const TimePhase ph = PhaseVariable(maps, g, p.q(t), p.qd(t), p.qdd(t));
    VectorXd d(5);
    for (int i = 0; i < 5; ++i) d(i) = BezierEval(g.alpha.row(i).transpose(), ph.tau, 0);
    return d;
  };
  const double h = 1e-4;
  for (double t : {0.2, 0.5, 0.9}) {
    const TimePhase ph = PhaseVariable(maps, g, p.q(t), p.qd(t), p.qdd(t));
    const VectorXd fd = (desired(t + h) - 2 * desired(t) + desired(t - h)) / (h * h);
    const VectorXd pack = DesiredDerivatives(g, ph);
    EXPECT_EQ(pack(0), 0.0);
    EXPECT_LE((pack.tail(5) - fd).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(BoundaryMatchTest, Postconditions) {
  const OutputMaps maps = MakeOutputMaps(StanceRoles(), 12);
  const VertexGait g = SampleGait();
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  VectorXd th(12), v(12);
  for (int i = 0; i < 12; ++i) {
    th(i) = d(rng);
    v(i) = d(rng);
  }
  th(10) = th(11) = 0.0;  // hip behind the end-of-step bound
  v(11) = 1.0;            // stance ankle advancing the hip
  v(10) = 0.0;
  const VertexGait m = BoundaryMatch(g, maps, th, v);
  const TimePhase ph = PhaseVariable(maps, m, th, v, VectorXd());
  EXPECT_NEAR(ph.tau, 0.0, 1e-15);
  const VirtualConstraints vc = EvaluateVirtualConstraints(maps, m, th, v, ph);
  EXPECT_LE(vc.y.tail(5).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(vc.y2_dot.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ((m.alpha.rightCols(5) - g.alpha.rightCols(5)).cwiseAbs().maxCoeff(), 0.0);
  // Already matched: idempotent.
  const VertexGait again = BoundaryMatch(m, maps, th, v);
  EXPECT_LE((again.alpha - m.alpha).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoundaryMatchTest, StalledPhaseThrows) {
  const OutputMaps maps = MakeOutputMaps(StanceRoles(), 12);
  try {
    BoundaryMatch(SampleGait(), maps, VectorXd::Zero(12), VectorXd::Zero(12));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(GaitFileTest, RoundTripIsExact) {
  GaitParams g;
  g.pt = SampleGait();
  g.pw = SampleGait();
  g.pw.alpha(2, 3) = 1.0 / 3.0;
  g.gains.kp = 64.0;
  g.provenance = "test fixture";
  const GaitParams back = ParseGait(SerializeGait(g));
  EXPECT_EQ((back.pt.alpha - g.pt.alpha).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((back.pw.alpha - g.pw.alpha).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(back.pw.dp_minus, g.pw.dp_minus);
  EXPECT_EQ(back.gains.kp, 64.0);
  EXPECT_EQ(back.provenance, "test fixture");
}

TEST(GaitFileTest, SchemaErrors) {
  try {
    ParseGait("sepsim-model v1\npt: {}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
  EXPECT_THROW(ParseGait("sepsim-gait v1\npt: {v_hip: 1}\n"), Error);
  try {
    LoadGait("/nonexistent/reference.gait");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

double Quadratic(const GaitParams& g) {
  double c = 0.0;
  for (Vertex v : {Vertex::kPt, Vertex::kPw}) {
    c += (g.at(v).alpha.rightCols(5).array() - 0.1).square().sum();
    c += std::pow(g.at(v).v_hip - 0.5, 2);
  }
  return c;
}

TEST(RefineTest, ZeroBudgetReturnsInput) {
  GaitParams g;
  g.pt = SampleGait();
  g.pw = SampleGait();
  const RefineResult r = RefineGait(g, Quadratic, 0, 1);
  EXPECT_EQ(r.evaluations, 0);
  EXPECT_EQ((r.gait.pt.alpha - g.pt.alpha).cwiseAbs().maxCoeff(), 0.0);
}

TEST(RefineTest, MonotoneAndDeterministic) {
  GaitParams g;
  g.pt = SampleGait();
  g.pw = SampleGait();
  const RefineResult a = RefineGait(g, Quadratic, 3000, 7);
  const RefineResult b = RefineGait(g, Quadratic, 3000, 7);
  EXPECT_LE(a.residual, a.initial_residual);
  EXPECT_LT(a.residual, 0.5 * a.initial_residual);
  EXPECT_LE(a.evaluations, 3000);
  EXPECT_EQ(a.residual, b.residual);
  EXPECT_NEAR(Quadratic(a.gait), a.residual, 1e-15);
  // Boundary coefficients are not free parameters.
  EXPECT_EQ((a.gait.pt.alpha.leftCols(2) - g.pt.alpha.leftCols(2)).cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace sepsim
