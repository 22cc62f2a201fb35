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

// Virtual constraints for walking: Bezier desired trajectories, the hip
// phase variable, the six-output library and impact boundary matching.

#ifndef SEPSIM_GAIT_HPP_
#define SEPSIM_GAIT_HPP_

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "sepsim/error.hpp"
#include "sepsim/sepctrl.hpp"

namespace sepsim {

inline constexpr int kBezierOrder = 6;
inline constexpr int kNumCoeffs = kBezierOrder + 1;
// y = (y1, y2_sc, y2_sh, y2_nsh, y2_nsk, y2_nsa)
inline constexpr int kNumOutputs = 6;
inline constexpr int kNumDegreeTwo = 5;

enum class Vertex { kPt, kPw };

const char* VertexName(Vertex v);
Vertex NextVertex(Vertex v);

// Value (order 0) or tau-derivative (order 1, 2) of a 6th order Bezier
// polynomial. tau is clamped to [0, 1]; derivatives vanish outside.
double BezierEval(const Eigen::Ref<const VectorXd>& alpha, double tau,
                  int order);
double BernsteinBasis(int k, double tau);

// Coordinate indices of the six leg roles and the stance limb lengths used
// by the linearized hip position.
struct RoleMap {
  int sh = -1, sk = -1, sa = -1;
  int nsh = -1, nsk = -1, nsa = -1;
  double r_sk = 0.0;
  double r_sa = 0.0;
};

struct VertexGait {
  MatrixXd alpha = MatrixXd::Zero(kNumDegreeTwo, kNumCoeffs);
  double v_hip = 0.0;
  double dp_plus = 0.0;   // hip position at the start of the domain
  double dp_minus = 1.0;  // hip position at the end of the domain
};

// mu1 = -k_hip y1, mu2 = -kp y2 - kd ydot2
struct Gains {
  double kp = 100.0;
  double kd = 20.0;
  double k_hip = 20.0;
};

struct GaitParams {
  VertexGait pt;
  VertexGait pw;
  Gains gains;
  std::string provenance;

  const VertexGait& at(Vertex v) const { return v == Vertex::kPt ? pt : pw; }
  VertexGait& at(Vertex v) { return v == Vertex::kPt ? pt : pw; }
};

// Linear maps on theta: delta_p_hip = hip_row . theta, y2a = c2 theta.
struct OutputMaps {
  VectorXd hip_row;  // eta
  MatrixXd c2;       // 5 x eta
};

OutputMaps MakeOutputMaps(const RoleMap& roles, int eta);

double HipPosition(const OutputMaps& maps, const VectorXd& theta);

// tau, tau_dot, tau_ddot by the chain rule through the linear hip position.
TimePhase PhaseVariable(const OutputMaps& maps, const VertexGait& gait,
                        const VectorXd& theta, const VectorXd& theta_dot,
                        const VectorXd& theta_ddot);
// d tau / d theta (constant).
VectorXd PhaseGradient(const OutputMaps& maps, const VertexGait& gait);

struct ActualOutputs {
  double y1 = 0.0;
  VectorXd y2;
};

ActualOutputs ComputeActualOutputs(const OutputMaps& maps,
                                   const VectorXd& theta,
                                   const VectorXd& theta_dot);

struct VirtualConstraints {
  VectorXd y;        // 6: (y1, y2)
  VectorXd y2_dot;   // 5
  VectorXd desired;  // [ydot1^d; yddot2^d]
};

// y1 = y1a - v_hip, y2 = y2a - b(tau); ydot1^d = 0 for the constant hip
// velocity, yddot2^d = b'' tau_dot^2 + b' tau_ddot.
VirtualConstraints EvaluateVirtualConstraints(const OutputMaps& maps,
                                              const VertexGait& gait,
                                              const VectorXd& theta,
                                              const VectorXd& theta_dot,
                                              const TimePhase& phase);

// Desired terms [0; b'' tau_dot^2 + b' tau_ddot] only.
VectorXd DesiredDerivatives(const VertexGait& gait, const TimePhase& phase);

// Re-anchors the phase so tau = 0 at the post-impact state and rewrites the
// first two coefficients of every degree-2 output so y2 = 0 and ydot2 = 0
// there. Throws kPrecondition if the phase does not advance.
VertexGait BoundaryMatch(const VertexGait& gait, const OutputMaps& maps,
                         const VectorXd& theta, const VectorXd& theta_dot);

// ---------------------------------------------------------------------------
// Gait files: first line "sepsim-gait v1", YAML body.

GaitParams LoadGait(const std::string& path);
GaitParams ParseGait(const std::string& text);
std::string SerializeGait(const GaitParams& gait);
void SaveGait(const GaitParams& gait, const std::string& path);

// ---------------------------------------------------------------------------
// Derivative-free refinement of the free gait parameters (Bezier indices
// 2..6 and v_hip of both vertices).

struct RefineResult {
  GaitParams gait;
  double initial_residual = 0.0;
  double residual = 0.0;
  int evaluations = 0;
};

// `residual` must return a finite cost or throw; failures count as a large
// cost. Nelder-Mead; deterministic given `seed`.
RefineResult RefineGait(const GaitParams& gait0,
                        const std::function<double(const GaitParams&)>& residual,
                        int budget, std::uint32_t seed);

}  // namespace sepsim

#endif  // SEPSIM_GAIT_HPP_
