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

// Input-output linearization of control-affine systems and numerical
// checkers for separable structure.

#ifndef SEPSIM_SEPCTRL_HPP_
#define SEPSIM_SEPCTRL_HPP_

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sepsim/error.hpp"

namespace sepsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// xdot = f(x) + g(x) u
struct AffineSystem {
  int n = 0;
  int m = 0;
  std::function<VectorXd(const VectorXd&)> drift;
  std::function<MatrixXd(const VectorXd&)> control;
};

enum class OutputGroup { kR, kS };

struct Output {
  std::string name;
  int relative_degree = 2;  // 1 or 2
  OutputGroup group = OutputGroup::kR;
  std::function<double(const VectorXd&)> value;
  // dy/dx. Optional; central differences are used when absent.
  std::function<VectorXd(const VectorXd&)> gradient;
  // d(L_f^{gamma-1} y)/dx. Optional; nested differences when absent. For
  // relative degree 1 this is the same as `gradient`.
  std::function<VectorXd(const VectorXd&)> lie_gradient;
};

using OutputBundle = std::vector<Output>;

struct TimePhase {
  double tau = 0.0;
  double tau_dot = 0.0;
  double tau_ddot = 0.0;
};

// First-order and nested finite-difference steps scaled by the state norm.
double FirstOrderStep(const VectorXd& x);
double SecondOrderStep(const VectorXd& x);

// (y(x + h v(x)) - y(x - h v(x))) / 2h
double DirectionalDerivative(const std::function<double(const VectorXd&)>& y,
                             const VectorXd& direction, const VectorXd& x,
                             double h);

VectorXd NumericalGradient(const std::function<double(const VectorXd&)>& y,
                           const VectorXd& x, double h);

// Rows ordered as the outputs: A = L_g L_f^{gamma-1} y, lf = L_f^gamma y.
struct IoDynamics {
  MatrixXd decoupling;
  VectorXd lf;
};

struct IoOptions {
  bool check_relative_degree = true;
};

// Core assembly from Lie gradients already evaluated at a point.
IoDynamics AssembleIoDynamics(const VectorXd& f, const MatrixXd& g,
                              const std::vector<VectorXd>& lie_gradients);

// Lie gradients of every output at x, analytic when provided.
std::vector<VectorXd> LieGradients(const OutputBundle& outputs,
                                   const std::function<VectorXd(const VectorXd&)>& drift,
                                   const VectorXd& x);

IoDynamics ComputeIoDynamics(const AffineSystem& system,
                             const OutputBundle& outputs, const VectorXd& x,
                             const IoOptions& options = {});

// Solves A u = -(lf - feedforward - mu). Throws kSingularDecoupling when A is
// numerically singular; logs cond(A) at trace level.
VectorXd SolveDecoupled(const IoDynamics& io, const VectorXd& mu,
                        const VectorXd& feedforward = {});

// u = -A^{-1}(L_f* y - mu)
VectorXd FeedbackLinearize(const AffineSystem& system,
                           const OutputBundle& outputs, const VectorXd& mu,
                           const VectorXd& x, const IoOptions& options = {});

// Supplies [ydot_1^d; yddot_2^d] for time-phase outputs.
using DesiredDerivativeSupplier =
    std::function<VectorXd(const VectorXd& x, const TimePhase& phase)>;

// u = -A^{-1}(L_f* y - [ydot_1^d; yddot_2^d] - mu)
VectorXd TimeVaryingControl(const AffineSystem& system,
                            const OutputBundle& outputs, const VectorXd& mu,
                            const VectorXd& x, const TimePhase& phase,
                            const DesiredDerivativeSupplier& desired,
                            const IoOptions& options = {});

// A subsystem seen from some evaluation point: the full state x, or an
// augmented measurement vector. Outputs are functions of local_state(point).
struct SubsystemView {
  int n_s = 0;
  int m_s = 0;
  std::function<VectorXd(const VectorXd&)> local_state;
  std::function<VectorXd(const VectorXd&)> drift;    // f_s at the point
  std::function<MatrixXd(const VectorXd&)> control;  // g_s at the point (s inputs)
};

// u_s = -A_s^{-1}(L_{f_s}* y_s - feedforward - mu_s); same code path for
// either kind of point.
VectorXd SubsystemControlLaw(const SubsystemView& view,
                             const OutputBundle& outputs, const VectorXd& mu_s,
                             const VectorXd& point,
                             const VectorXd& feedforward = {},
                             const IoOptions& options = {});

IoDynamics SubsystemIoDynamics(const SubsystemView& view,
                               const OutputBundle& outputs,
                               const VectorXd& point,
                               const IoOptions& options = {});

struct SeparableStructure {
  std::vector<int> xr;
  std::vector<int> xs;
  std::vector<int> ur;
  std::vector<int> us;

  void Validate(int n, int m) const;
};

// Residuals are max over samples of raw / (1 + scale).
struct CheckReport {
  std::string name;
  bool passed = true;
  double residual = 0.0;
  double threshold = 0.0;
  int samples = 0;
  std::string note;
};

CheckReport CheckSeparability(const AffineSystem& system,
                              const SeparableStructure& structure,
                              const std::vector<VectorXd>& samples,
                              double tolerance = 1e-10);

// Cross-term conditions for s-outputs: intermediate Lie derivatives along
// f_s must not change when x_r moves along f_r (D3.1) or along the r-rows of
// g (D3.2), and y_s itself must not read x_r. `subsystem_drift` returns f_s
// embedded in full coordinates (zero on x_r).
struct OutputConditionReport {
  CheckReport locality;
  CheckReport drift_terms;
  CheckReport input_terms;

  bool passed() const {
    return locality.passed && drift_terms.passed && input_terms.passed;
  }
};

OutputConditionReport CheckOutputConditions(
    const AffineSystem& system, const SeparableStructure& structure,
    const OutputBundle& s_outputs,
    const std::function<VectorXd(const VectorXd&)>& subsystem_drift,
    const std::vector<VectorXd>& samples, double tolerance = 1e-6);

// f_s(x) vs fbar_s(T(x)) and g_s(x) vs gbar_s(T(x)).
CheckReport CheckSubsystemEquivalence(
    const SubsystemView& full, const SubsystemView& reduced,
    const std::function<VectorXd(const VectorXd&)>& transform,
    const std::vector<VectorXd>& samples, double tolerance = 1e-8);

}  // namespace sepsim

#endif  // SEPSIM_SEPCTRL_HPP_
