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

// Tests for the generic affine-control layer.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sepsim/sepctrl.hpp"

namespace sepsim {
namespace {

VectorXd Vec(std::initializer_list<double> v) {
  VectorXd out(v.size());
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

AffineSystem DoubleIntegrator() {
  AffineSystem s;
  s.n = 2;
  s.m = 1;
  s.drift = [](const VectorXd& x) { return Vec({x(1), 0.0}); };
  s.control = [](const VectorXd&) {
    MatrixXd g(2, 1);
    g << 0.0, 1.0;
    return g;
  };
  return s;
}

Output Position(int index, int n) {
  Output o;
  o.name = "x" + std::to_string(index);
  o.relative_degree = 2;
  o.value = [index](const VectorXd& x) { return x(index); };
  o.gradient = [index, n](const VectorXd&) { return VectorXd::Unit(n, index); };
  // States are (positions, velocities) halves.
  o.lie_gradient = [index, n](const VectorXd&) {
    return VectorXd::Unit(n, index + n / 2);
  };
  return o;
}

// Two coupled pendulum-like coordinates: x = (q1, q2, v1, v2); input 0
// drives q1 only, input 1 both.
AffineSystem Coupled(double leak = 0.0) {
  AffineSystem s;
  s.n = 4;
  s.m = 2;
  s.drift = [](const VectorXd& x) {
    return Vec({x(2), x(3), -std::sin(x(0)) + x(3) * x(3),
                -x(0) * x(1) - 0.5 * std::cos(x(0)) * x(3)});
  };
  s.control = [leak](const VectorXd& x) {
    MatrixXd g = MatrixXd::Zero(4, 2);
    g(2, 0) = 1.0 + 0.1 * std::cos(x(1));
    g(2, 1) = 0.2;
    g(3, 0) = leak;
    g(3, 1) = 1.5 + 0.2 * std::sin(x(0));
    return g;
  };
  return s;
}

// y = q1 + 0.3 sin q2, relative degree 2, with analytic d(L_f y)/dx.
Output Curved() {
  Output o;
  o.name = "curved";
  o.relative_degree = 2;
  o.value = [](const VectorXd& x) { return x(0) + 0.3 * std::sin(x(1)); };
  o.gradient = [](const VectorXd& x) {
    return Vec({1.0, 0.3 * std::cos(x(1)), 0.0, 0.0});
  };
  o.lie_gradient = [](const VectorXd& x) {
    // L_f y = v1 + 0.3 cos(q2) v2
    return Vec({0.0, -0.3 * std::sin(x(1)) * x(3), 1.0, 0.3 * std::cos(x(1))});
  };
  return o;
}

SeparableStructure CoupledStructure() { return {{0, 2}, {1, 3}, {0}, {1}}; }

TEST(DirectionalDerivativeTest, ConstantAndLinear) {
  const VectorXd x = Vec({0.3, -1.2, 2.0});
  EXPECT_EQ(DirectionalDerivative([](const VectorXd&) { return 4.0; },
                                  Vec({1, 2, 3}), x, 1e-6),
            0.0);
  const VectorXd a = Vec({2.0, -1.0, 0.5}), b = Vec({0.25, 0.5, 4.0});
  EXPECT_NEAR(DirectionalDerivative([&](const VectorXd& z) { return a.dot(z); },
                                    b, x, 0.5),
              a.dot(b), 1e-15);
  EXPECT_THROW(DirectionalDerivative([](const VectorXd&) { return 1.0; }, b, x, 0.0),
               Error);
}

TEST(IoDynamicsTest, DoubleIntegrator) {
  const IoDynamics io = ComputeIoDynamics(DoubleIntegrator(), {Position(0, 2)},
                                          Vec({0.7, -0.4}));
  EXPECT_NEAR(io.decoupling(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(io.lf(0), 0.0, 1e-9);
}

TEST(IoDynamicsTest, LinearSystemRelativeDegreeOne) {
  // F = [0 1; -2 -3], G = [1 0; 1 2], C = [1 1; 0 1], x = (1, 2):
  // CG = [2 2; 1 2], CFx = C (2, -8) = (-6, -8).
  MatrixXd fm(2, 2), gm(2, 2);
  fm << 0, 1, -2, -3;
  gm << 1, 0, 1, 2;
  AffineSystem s{2, 2, [fm](const VectorXd& x) -> VectorXd { return fm * x; },
                 [gm](const VectorXd&) -> MatrixXd { return gm; }};
  OutputBundle ys(2);
  ys[0] = {"y0", 1, OutputGroup::kR, [](const VectorXd& x) { return x(0) + x(1); }};
  ys[1] = {"y1", 1, OutputGroup::kR, [](const VectorXd& x) { return x(1); }};
  const IoDynamics io = ComputeIoDynamics(s, ys, Vec({1.0, 2.0}));
  MatrixXd expect(2, 2);
  expect << 2, 2, 1, 2;
  EXPECT_LE((io.decoupling - expect).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(io.lf(0), -6.0, 1e-8);
  EXPECT_NEAR(io.lf(1), -8.0, 1e-8);
}

TEST(IoDynamicsTest, AnalyticMatchesNestedDifferences) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  const AffineSystem s = Coupled();
  Output analytic = Curved();
  Output numeric = analytic;
  numeric.lie_gradient = nullptr;
  numeric.gradient = nullptr;
  for (int k = 0; k < 20; ++k) {
    const VectorXd x = Vec({d(rng), d(rng), d(rng), d(rng)});
    const IoDynamics a = ComputeIoDynamics(s, {analytic, Position(1, 4)}, x);
    const IoDynamics n = ComputeIoDynamics(s, {numeric, Position(1, 4)}, x);
    EXPECT_LE((a.decoupling - n.decoupling).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LE((a.lf - n.lf).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(IoDynamicsTest, RejectsWrongRelativeDegree) {
  // Declaring a velocity output as relative degree 2 is inconsistent.
  Output v;
  v.name = "v";
  v.relative_degree = 2;
  v.value = [](const VectorXd& x) { return x(1); };
  try {
    ComputeIoDynamics(DoubleIntegrator(), {v}, Vec({0.0, 1.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRelativeDegree);
  }
}

TEST(FeedbackLinearizeTest, DoubleIntegratorPd) {
  const VectorXd x = Vec({0.4, -0.2});
  const double mu = -100.0 * x(0) - 20.0 * x(1);
  const VectorXd u = FeedbackLinearize(DoubleIntegrator(), {Position(0, 2)},
                                       Vec({mu}), x);
  EXPECT_NEAR(u(0), mu, 1e-9);
  const VectorXd rest = FeedbackLinearize(DoubleIntegrator(), {Position(0, 2)},
                                          Vec({0.0}), Vec({0.4, 0.0}));
  EXPECT_NEAR(rest(0), 0.0, 1e-12);
}

TEST(FeedbackLinearizeTest, SingularDecouplingThrows) {
  AffineSystem s = DoubleIntegrator();
  s.control = [](const VectorXd&) { return MatrixXd::Zero(2, 1); };
  Output y = Position(0, 2);
  try {
    FeedbackLinearize(s, {y}, Vec({0.0}), Vec({0.1, 0.1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSingularDecoupling);
  }
}

VectorXd Rk4(const std::function<VectorXd(const VectorXd&)>& rhs,
             const VectorXd& x, double dt) {
  const VectorXd k1 = rhs(x), k2 = rhs(x + 0.5 * dt * k1),
                 k3 = rhs(x + 0.5 * dt * k2), k4 = rhs(x + dt * k3);
  return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

TEST(FeedbackLinearizeTest, ClosedLoopOutputsFollowMu) {
  const AffineSystem s = Coupled();
  const OutputBundle ys = {Curved(), Position(1, 4)};
  auto mu_of = [&](const VectorXd& x) {
    VectorXd mu(2);
    for (int i = 0; i < 2; ++i) {
      const double y = ys[i].value(x);
      const double yd = ys[i].gradient(x).dot(s.drift(x));
      mu(i) = -100.0 * y - 20.0 * yd;
    }
    return mu;
  };
  auto rhs = [&](const VectorXd& x) -> VectorXd {
    return s.drift(x) + s.control(x) * FeedbackLinearize(s, ys, mu_of(x), x);
  };
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int k = 0; k < 10; ++k) {
    const VectorXd x0 = Vec({d(rng), d(rng), d(rng), d(rng)});
    const double dt = 1e-3;
    const VectorXd xp = Rk4(rhs, x0, dt), xm = Rk4(rhs, x0, -dt);
    const VectorXd mu = mu_of(x0);
    for (int i = 0; i < 2; ++i) {
      const double ydd =
          (ys[i].value(xp) - 2 * ys[i].value(x0) + ys[i].value(xm)) / (dt * dt);
      EXPECT_NEAR(ydd, mu(i), 1e-4 * (1.0 + std::abs(mu(i))));
    }
  }
}

TEST(TimeVaryingControlTest, ZeroPhaseRateReducesToFeedbackLinearize) {
  const AffineSystem s = Coupled();
  const OutputBundle ys = {Curved(), Position(1, 4)};
  const VectorXd x = Vec({0.1, 0.2, -0.3, 0.4}), mu = Vec({1.0, -2.0});
  const DesiredDerivativeSupplier ff = [](const VectorXd&, const TimePhase& p) {
    return Vec({3.0 * p.tau_dot * p.tau_dot + 2.0 * p.tau_ddot, -p.tau_ddot});
  };
  const VectorXd a = TimeVaryingControl(s, ys, mu, x, {0.4, 0.0, 0.0}, ff);
  const VectorXd b = FeedbackLinearize(s, ys, mu, x);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-14);
  const VectorXd c = TimeVaryingControl(s, ys, mu, x, {0.4, 1.0, 0.5}, ff);
  EXPECT_GT((c - b).cwiseAbs().maxCoeff(), 1e-3);
}

SubsystemView CoupledSubsystem(const AffineSystem& s) {
  SubsystemView v;
  v.n_s = 2;
  v.m_s = 1;
  v.local_state = [](const VectorXd& x) { return Vec({x(1), x(3)}); };
  v.drift = [s](const VectorXd& x) {
    const VectorXd f = s.drift(x);
    return Vec({f(1), f(3)});
  };
  v.control = [s](const VectorXd& x) {
    const MatrixXd g = s.control(x);
    MatrixXd gs(2, 1);
    gs << g(1, 1), g(3, 1);
    return gs;
  };
  return v;
}

Output LocalPosition() {
  Output o = Position(0, 2);
  o.group = OutputGroup::kS;
  o.lie_gradient = [](const VectorXd&) { return Vec({0.0, 1.0}); };
  return o;
}

TEST(SubsystemControlLawTest, MatchesFullLawRows) {
  const AffineSystem s = Coupled();
  const SubsystemView view = CoupledSubsystem(s);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int k = 0; k < 20; ++k) {
    const VectorXd x = Vec({d(rng), d(rng), d(rng), d(rng)});
    const VectorXd mu = Vec({d(rng), d(rng)});
    const VectorXd u = FeedbackLinearize(s, {Curved(), Position(1, 4)}, mu, x);
    const VectorXd us =
        SubsystemControlLaw(view, {LocalPosition()}, mu.tail(1), x);
    EXPECT_NEAR(u(1), us(0), 1e-10 * (1.0 + u.cwiseAbs().maxCoeff()));
  }
}

TEST(SubsystemControlLawTest, IgnoresMuR) {
  const AffineSystem s = Coupled();
  const SubsystemView view = CoupledSubsystem(s);
  const VectorXd x = Vec({0.3, -0.1, 0.2, 0.5});
  const VectorXd a = SubsystemControlLaw(view, {LocalPosition()}, Vec({0.7}), x);
  // Full law with two different mu_r values gives the same s-row ...
  const VectorXd u1 = FeedbackLinearize(s, {Curved(), Position(1, 4)}, Vec({5.0, 0.7}), x);
  const VectorXd u2 = FeedbackLinearize(s, {Curved(), Position(1, 4)}, Vec({-9.0, 0.7}), x);
  EXPECT_NEAR(u1(1), u2(1), 1e-12);
  // ... and the subsystem law never sees mu_r at all.
  EXPECT_EQ(a(0), SubsystemControlLaw(view, {LocalPosition()}, Vec({0.7}), x)(0));
}

TEST(SubsystemControlLawTest, TrivialPartitionEqualsFullLaw) {
  const AffineSystem s = Coupled();
  SubsystemView all;
  all.n_s = 4;
  all.m_s = 2;
  all.local_state = [](const VectorXd& x) { return x; };
  all.drift = s.drift;
  all.control = s.control;
  const OutputBundle ys = {Curved(), Position(1, 4)};
  const VectorXd x = Vec({0.2, 0.3, -0.4, 0.1}), mu = Vec({0.5, -0.5});
  EXPECT_LE((SubsystemControlLaw(all, ys, mu, x) - FeedbackLinearize(s, ys, mu, x))
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
}

std::vector<VectorXd> Samples(int n, int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<VectorXd> out;
  for (int k = 0; k < count; ++k) {
    VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = d(rng);
    out.push_back(x);
  }
  return out;
}

TEST(CheckSeparabilityTest, PassAndCounterexample) {
  const auto samples = Samples(4, 20, 11);
  EXPECT_TRUE(CheckSeparability(Coupled(), CoupledStructure(), samples).passed);
  const CheckReport bad = CheckSeparability(Coupled(0.05), CoupledStructure(), samples);
  EXPECT_FALSE(bad.passed);
  EXPECT_GT(bad.residual, 1e-3);
  EXPECT_EQ(bad.samples, 20);
}

TEST(CheckSeparabilityTest, EmptyRPartitionIsVacuous) {
  const SeparableStructure all{{}, {0, 1, 2, 3}, {}, {0, 1}};
  const CheckReport r = CheckSeparability(Coupled(0.05), all, Samples(4, 5, 1));
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.residual, 0.0);
  const CheckReport none = CheckSeparability(Coupled(), CoupledStructure(), {});
  EXPECT_TRUE(none.passed);
  EXPECT_EQ(none.samples, 0);
}

TEST(CheckOutputConditionsTest, LocalOutputPassesContaminatedFails) {
  const AffineSystem s = Coupled();
  auto fs = [&s](const VectorXd& x) {
    const VectorXd f = s.drift(x);
    return Vec({0.0, f(1), 0.0, f(3)});
  };
  const auto samples = Samples(4, 20, 13);
  const OutputConditionReport ok =
      CheckOutputConditions(s, CoupledStructure(), {Position(1, 4)}, fs, samples);
  EXPECT_TRUE(ok.passed());

  Output dirty;
  dirty.name = "dirty";
  dirty.relative_degree = 2;
  dirty.group = OutputGroup::kS;
  dirty.value = [](const VectorXd& x) { return x(1) + 1e-3 * x(0); };
  const OutputConditionReport bad =
      CheckOutputConditions(s, CoupledStructure(), {dirty}, fs, samples);
  EXPECT_FALSE(bad.passed());
  EXPECT_FALSE(bad.locality.passed);

  // Relative degree 1 output of x_s only: the drift condition is vacuous.
  Output vel;
  vel.name = "v2";
  vel.relative_degree = 1;
  vel.value = [](const VectorXd& x) { return x(3); };
  const OutputConditionReport r1 =
      CheckOutputConditions(s, CoupledStructure(), {vel}, fs, samples);
  EXPECT_TRUE(r1.passed());
  EXPECT_EQ(r1.drift_terms.residual, 0.0);
}

TEST(CheckSubsystemEquivalenceTest, DetectsMismatch) {
  const AffineSystem s = Coupled();
  const SubsystemView view = CoupledSubsystem(s);
  auto identity = [](const VectorXd& x) { return x; };
  const auto samples = Samples(4, 10, 17);
  EXPECT_TRUE(CheckSubsystemEquivalence(view, view, identity, samples).passed);
  auto flipped = [](const VectorXd& x) {
    VectorXd y = x;
    y(0) = -y(0);
    return y;
  };
  EXPECT_FALSE(CheckSubsystemEquivalence(view, view, flipped, samples).passed);
}

}  // namespace
}  // namespace sepsim
