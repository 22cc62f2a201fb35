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

// Small hand-built models shared by the unit tests.

#ifndef SEPSIM_TESTS_UNIT_TEST_MODELS_HPP_
#define SEPSIM_TESTS_UNIT_TEST_MODELS_HPP_

#include <random>

#include "sepsim/multibody.hpp"

namespace sepsim::testing {

inline LinkParams Link(double m, double l, double c, double inertia) {
  return {m, l, c, inertia};
}

// Free-floating two-link chain: planar base + one revolute joint.
inline RobotModel DoublePendulum(double gravity = 9.81) {
  std::vector<BodySpec> b(2);
  b[0] = {"upper", Link(1.3, 0.8, 0.35, 0.07), JointKind::kPlanarBase, -1};
  b[1] = {"lower", Link(0.9, 0.6, 0.25, 0.03), JointKind::kRevolute, 0, 0.8};
  MatrixXd bmat = MatrixXd::Zero(4, 1);
  bmat(3, 0) = 1.0;
  return RobotModel(std::move(b), bmat, gravity,
                    {{"tip", 1, Vector2d(0.0, -0.6)}});
}

// Planar base, revolute, fixed-3dof, revolute: exercises every joint kind
// and a nonzero axis offset.
inline RobotModel MixedChain(double gravity = 9.81) {
  std::vector<BodySpec> b(4);
  b[0] = {"base", Link(4.0, 0.5, 0.2, 0.3), JointKind::kPlanarBase, -1, 0.0,
          3.14159};
  b[1] = {"thigh", Link(2.0, 0.45, 0.2, 0.04), JointKind::kRevolute, 0, 0.1};
  b[2] = {"socket", Link(0.8, 0.15, 0.07, 0.01), JointKind::kFixed3Dof, 1,
          0.3};
  b[3] = {"foot", Link(0.5, 0.25, 0.1, 0.005), JointKind::kRevolute, 2, 0.15,
          1.5707963};
  MatrixXd bmat = MatrixXd::Zero(8, 2);
  bmat(3, 0) = 1.0;
  bmat(7, 1) = 30.0;
  return RobotModel(std::move(b), bmat, gravity,
                    {{"toe", 3, Vector2d(0.05, -0.2)},
                     {"mount", 1, Vector2d(0.0, -0.3)}});
}

// One planar-base body with all mass at its origin.
inline RobotModel PointMass(double m, double gravity = 9.81) {
  std::vector<BodySpec> b(1);
  b[0] = {"mass", Link(m, 1.0, 0.0, 0.01), JointKind::kPlanarBase, -1};
  return RobotModel(std::move(b), MatrixXd::Zero(3, 0), gravity);
}

inline VectorXd Uniform(std::mt19937& rng, int n, double lo = -1.0,
                        double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = d(rng);
  return x;
}

}  // namespace sepsim::testing

#endif  // SEPSIM_TESTS_UNIT_TEST_MODELS_HPP_
