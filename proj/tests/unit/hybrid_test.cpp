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
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "sepsim/hybrid.hpp"
#include "test_models.hpp"

namespace sepsim {
namespace {

using testing::DoublePendulum;
using testing::PointMass;

DomainSpec FreeFall(const RobotModel& model, double floor = 0.0) {
  DomainSpec d;
  d.closed_loop = [&model](const State& x) {
    ClosedLoopEval e;
    e.qdd = ForwardDynamics(model, {}, x.q, x.v, VectorXd::Zero(0));
    e.u = VectorXd::Zero(0);
    e.outputs = VectorXd::Zero(0);
    return e;
  };
  d.guard = [floor](const State& x) { return x.q(1) - floor; };
  return d;
}

State At(double z, double vz) {
  State x{VectorXd::Zero(3), VectorXd::Zero(3)};
  x.q(1) = z;
  x.v(1) = vz;
  return x;
}

TEST(IntegrateDomain, BallisticDropHitsAtAnalyticTime) {
  const RobotModel m = PointMass(2.0);
  const double h = 1.3;
  Trace tr;
  const DomainResult r =
      IntegrateDomain(m, FreeFall(m), At(h, 0.0), 0.0, 5.0, 0, {}, tr);
  ASSERT_TRUE(r.guard_hit);
  EXPECT_NEAR(r.t_end, std::sqrt(2.0 * h / 9.81), 1e-8);
  EXPECT_LE(std::abs(r.guard_value), 1e-10);
  EXPECT_NEAR(r.end.v(1), -std::sqrt(2.0 * 9.81 * h), 1e-7);
  ASSERT_EQ(tr.domains.size(), 1u);
  EXPECT_EQ(tr.domains[0].end_sample, static_cast<int>(tr.samples.size()));
}

TEST(IntegrateDomain, SamplesLieOnTheOutputGrid) {
  const RobotModel m = PointMass(1.0);
  Trace tr;
  IntegrateDomain(m, FreeFall(m), At(0.5, 0.0), 0.0, 5.0, 0, {}, tr);
  ASSERT_GT(tr.samples.size(), 300u);
  for (size_t i = 1; i + 1 < tr.samples.size(); ++i) {
    EXPECT_NEAR(tr.samples[i].t, 1e-3 * static_cast<double>(i), 1e-12);
    const double t = tr.samples[i].t;
    EXPECT_NEAR(tr.samples[i].q(1), 0.5 - 0.5 * 9.81 * t * t, 1e-9);
  }
}

TEST(IntegrateDomain, ImmediateHitLeavesNoSamples) {
  const RobotModel m = PointMass(1.0);
  Trace tr;
  const DomainResult r =
      IntegrateDomain(m, FreeFall(m), At(-1e-3, -0.4), 0.2, 5.0, 0, {}, tr);
  EXPECT_TRUE(r.guard_hit);
  EXPECT_DOUBLE_EQ(r.t_end, 0.2);
  EXPECT_TRUE(tr.samples.empty());
  ASSERT_EQ(tr.domains.size(), 1u);
}

TEST(IntegrateDomain, StopsAtTimeoutWithoutGuard) {
  const RobotModel m = PointMass(1.0, 0.0);
  Trace tr;
  const DomainResult r =
      IntegrateDomain(m, FreeFall(m), At(1.0, 0.0), 0.0, 0.25, 0, {}, tr);
  EXPECT_FALSE(r.guard_hit);
  EXPECT_DOUBLE_EQ(r.t_end, 0.25);
  EXPECT_NEAR(r.end.q(1), 1.0, 1e-14);
}

TEST(IntegrateDomain, DisarmedCrossingIsIgnored) {
  const RobotModel m = PointMass(1.0);
  DomainSpec d = FreeFall(m);
  d.armed = [](const State& x) { return x.v(1) < -5.0; };
  Trace tr;
  const DomainResult r = IntegrateDomain(m, d, At(1.0, 0.0), 0.0, 0.8, 0, {}, tr);
  EXPECT_FALSE(r.guard_hit);
}

TEST(IntegrateDomain, ConstrainedPendulumStaysOnManifold) {
  const RobotModel m = DoublePendulum();
  ConstraintSet cs;
  cs.items.push_back(GroundContact{m.frame("upper"), Pose2{0.0, 0.0, 0.4}});
  DomainSpec d;
  d.constraints = cs;
  d.closed_loop = [&](const State& x) {
    ClosedLoopEval e;
    e.u = VectorXd::Zero(1);
    e.qdd = ForwardDynamics(m, cs, x.q, x.v, e.u);
    return e;
  };
  d.guard = [](const State&) { return 1.0; };
  State x0{VectorXd::Zero(4), VectorXd::Zero(4)};
  x0.q(2) = 0.4;
  x0.q(3) = 1.1;
  x0.v(3) = 0.5;
  Trace tr;
  const DomainResult r = IntegrateDomain(m, d, x0, 0.0, 2.0, 0, {}, tr);
  EXPECT_FALSE(r.guard_hit);
  EXPECT_LE(ConstraintResidual(m, cs, r.end.q).lpNorm<Eigen::Infinity>(), 1e-10);
  const double e0 = ComputeEnergy(m, x0.q, x0.v).total();
  const double e1 = ComputeEnergy(m, r.end.q, r.end.v).total();
  EXPECT_NEAR(e0, e1, 1e-6);
}

TEST(IntegrateDomain, RejectsStateOffManifold) {
  const RobotModel m = DoublePendulum();
  DomainSpec d = FreeFall(m);
  d.constraints.items.push_back(GroundContact{m.frame("upper"), Pose2{}});
  State x0{VectorXd::Zero(4), VectorXd::Zero(4)};
  x0.q(0) = 0.1;
  Trace tr;
  try {
    IntegrateDomain(m, d, x0, 0.0, 1.0, 0, {}, tr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(ImpactMap, PointMassPlasticImpactStopsTranslation) {
  const RobotModel m = PointMass(3.0);
  ConstraintSet cs;
  cs.items.push_back(GroundContact{m.frame("mass"), Pose2{}});
  const Vector3d vm(1.0, -2.0, 0.5);
  const ImpactResult r = ImpactMap(m, cs, VectorXd::Zero(3), vm);
  EXPECT_LE(r.v_plus.norm(), 1e-14);
  EXPECT_NEAR(r.impulse(0), -3.0, 1e-12);
  EXPECT_NEAR(r.impulse(1), 6.0, 1e-12);
  EXPECT_NEAR(r.impulse(2), -0.005, 1e-14);
}

TEST(ImpactMap, MatchesMinimumEnergyProjection) {
  const RobotModel m = DoublePendulum();
  ConstraintSet cs;
  cs.items.push_back(GroundContact{m.frame("tip"), Pose2{}});
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const VectorXd q = testing::Uniform(rng, 4);
    const VectorXd vm = testing::Uniform(rng, 4, -2.0, 2.0);
    const ImpactResult r = ImpactMap(m, cs, q, vm);
    // Oracle: v+ minimizes (v - v-)^T D (v - v-) over the null space of J.
    const MatrixXd J = FrameJacobian(m, m.frame("tip"), q);
    const MatrixXd N = J.fullPivLu().kernel();
    const MatrixXd D = MassMatrix(m, q);
    const VectorXd oracle =
        N * (N.transpose() * D * N).ldlt().solve(N.transpose() * D * vm);
    EXPECT_LE((r.v_plus - oracle).norm(), 1e-10);
    EXPECT_LE((J * r.v_plus).norm(), 1e-12);
    EXPECT_LE(ComputeEnergy(m, q, r.v_plus).kinetic,
              ComputeEnergy(m, q, vm).kinetic + 1e-12);
  }
}

HybridSpec Bouncer(const RobotModel& m) {
  HybridSpec spec;
  spec.enter = [&m](Vertex v, const State&, int step) {
    DomainSpec d = FreeFall(m, -0.5 * step);
    d.vertex = v;
    return d;
  };
  spec.post_impact_constraints = [](Vertex, const State&) { return ConstraintSet{}; };
  return spec;
}

TEST(StepCycle, ZeroStepsReturnsInitialState) {
  const RobotModel m = PointMass(1.0);
  const Trace tr = StepCycle(m, Bouncer(m), Vertex::kPt, At(1.0, 0.0), 0, {});
  ASSERT_EQ(tr.samples.size(), 1u);
  EXPECT_DOUBLE_EQ(tr.samples[0].q(1), 1.0);
  EXPECT_TRUE(tr.impacts.empty());
}

TEST(StepCycle, AlternatesDomainsAndRecordsImpacts) {
  const RobotModel m = PointMass(1.0);
  const Trace tr = StepCycle(m, Bouncer(m), Vertex::kPt, At(1.0, 0.0), 2, {});
  ASSERT_EQ(tr.domains.size(), 2u);
  ASSERT_EQ(tr.impacts.size(), 2u);
  EXPECT_EQ(tr.domains[0].vertex, Vertex::kPt);
  EXPECT_EQ(tr.domains[1].vertex, Vertex::kPw);
  EXPECT_NEAR(tr.impacts[0].t, std::sqrt(2.0 / 9.81), 1e-8);
  EXPECT_NEAR(tr.impacts[1].t, std::sqrt(2.0 * 1.5 / 9.81), 1e-8);
  EXPECT_NEAR(tr.impacts[0].kinetic_after, tr.impacts[0].kinetic_before, 1e-12);
}

TEST(StepCycle, TimeoutRaises) {
  const RobotModel m = PointMass(1.0, 0.0);
  HybridSpec spec = Bouncer(m);
  spec.domain_timeout = 0.1;
  try {
    StepCycle(m, spec, Vertex::kPt, At(1.0, 0.0), 1, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTimeout);
  }
}

TEST(TraceCsv, RoundTripsExactly) {
  const RobotModel m = PointMass(1.0);
  const Trace tr = StepCycle(m, Bouncer(m), Vertex::kPt, At(0.3, 0.1), 2, {});
  const auto path =
      (std::filesystem::temp_directory_path() / "sepsim_trace_test.csv").string();
  WriteTraceCsv(tr, path);
  const Trace back = ReadTraceCsv(path);
  ASSERT_EQ(back.samples.size(), tr.samples.size());
  for (size_t i = 0; i < tr.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].t, tr.samples[i].t);
    EXPECT_EQ(back.samples[i].q, tr.samples[i].q);
    EXPECT_EQ(back.samples[i].v, tr.samples[i].v);
    EXPECT_EQ(back.samples[i].vertex, tr.samples[i].vertex);
  }
  ASSERT_EQ(back.domains.size(), 2u);
  EXPECT_EQ(back.domains[1].vertex, Vertex::kPw);
  std::filesystem::remove(path);
}

TEST(TraceCsv, MalformedFileIsSchemaError) {
  const auto path =
      (std::filesystem::temp_directory_path() / "sepsim_bad_trace.csv").string();
  {
    std::ofstream f(path);
    f << "t,domain,step,q0\n0.0,pt,0\n";
  }
  try {
    ReadTraceCsv(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace sepsim
