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

// Amputee-prosthesis walker: model construction from anthropometric
// fractions, the prosthesis subsystem model, the measurement transform, the
// domain controllers, and walking/replay drivers.

#ifndef SEPSIM_PROSTHESIS_HPP_
#define SEPSIM_PROSTHESIS_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sepsim/gait.hpp"
#include "sepsim/hybrid.hpp"
#include "sepsim/multibody.hpp"
#include "sepsim/sepctrl.hpp"

namespace sepsim {

// ---------------------------------------------------------------------------
// Parameters.

// Fractions of body mass, body height, segment length, segment length.
struct SegmentFractions {
  double mass = 0.0;
  double length = 0.0;
  double com = 0.0;
  double gyration = 0.0;
};

struct AnthropometricTable {
  std::map<std::string, SegmentFractions> segments;  // torso, thigh, shank, foot
};

// mass = f.mass * M, length = f.length * H, com = f.com * length,
// inertia = mass * (f.gyration * length)^2.
std::map<std::string, LinkParams> Anthropometrics(
    double height, double mass, const AnthropometricTable& table);

// Part of the amputated thigh kept by the user; fractions of the intact thigh
// (length, mass) and of the residual length (com, gyration).
struct ResidualLimb {
  double length_fraction = 0.55;
  double mass_fraction = 0.6;
  double com = 0.45;
  double gyration = 0.3;
};

// One prosthesis part. length <= 0 means "derive from the human leg";
// com and gyration are fractions of the length.
struct PartSpec {
  double mass = 1.0;
  double length = 0.0;
  double com = 0.5;
  double gyration = 0.3;
};

struct ProsthesisSpec {
  PartSpec socket;  // spans the missing thigh length
  PartSpec shank;   // default length: intact shank
  PartSpec foot;    // default length: intact foot
  double knee_ratio = 50.0;
  double ankle_ratio = 50.0;
};

struct AmputeeConfig {
  std::string name = "amputee";
  double height = 1.73;
  double mass = 65.8;
  double gravity = 9.81;
  // Added to the human segments, distributed in proportion to their masses.
  double mass_delta = 0.0;
  double human_ratio = 1.0;
  AnthropometricTable table;
  ResidualLimb residual;
  ProsthesisSpec prosthesis;
};

// Files start with "sepsim-model v1". An amputee file carries `subject`,
// `anthropometrics`, `residual_limb` and `prosthesis` sections; see README.
AmputeeConfig ParseAmputeeConfig(const std::string& text);
AmputeeConfig LoadAmputeeConfig(const std::string& path);

// Generic chain files (`bodies`, `actuation`, `frames`, `gravity`).
RobotModel ParseRobotModel(const std::string& text);

// ---------------------------------------------------------------------------
// Models.

struct FullModelLayout {
  static constexpr int kEta = 12;
  static constexpr int kInputs = 6;
  // theta = (x, z, phi, lh, lk, la, rh, fx, fz, fphi, pk, pa)
  static constexpr int kX = 0, kZ = 1, kPhi = 2;
  static constexpr int kLh = 3, kLk = 4, kLa = 5, kRh = 6;
  static constexpr int kFx = 7, kFz = 8, kFphi = 9;
  static constexpr int kPk = 10, kPa = 11;
  // Input columns: lh, lk, la, rh | pk, pa.
  static constexpr int kUPk = 4, kUPa = 5;

  FrameId socket;        // socket body frame (child side of the weld)
  FrameId socket_mount;  // end of the residual limb (parent side)
  FrameId left_foot;
  FrameId prosthesis_foot;
  FrameId torso;
  double thigh_length = 0.0;
  double shank_length = 0.0;
  double residual_length = 0.0;
  double leg_length = 0.0;
  double human_mass = 0.0;  // sum of human segment masses
};

struct SubsystemLayout {
  static constexpr int kEta = 5;  // (xB, zB, phiB, pk, pa)
  static constexpr int kPk = 3, kPa = 4;
  FrameId base;
  FrameId foot;
};

// Augmented measurement vector layout: (thetaB[3], thetaB_dot[3], x_s[4],
// F_f[3]) with x_s = (pk, pa, pk_dot, pa_dot).
struct AugmentedLayout {
  static constexpr int kSize = 13;
  static constexpr int kBase = 0, kBaseDot = 3, kXs = 6, kWrench = 10;
};

class AmputeeSystem {
 public:
  explicit AmputeeSystem(const AmputeeConfig& config);

  const AmputeeConfig& config() const { return config_; }
  const RobotModel& full() const { return *full_; }
  const RobotModel& subsystem() const { return *sub_; }
  const FullModelLayout& layout() const { return layout_; }
  const SubsystemLayout& sub_layout() const { return sub_layout_; }
  const std::map<std::string, LinkParams>& human_links() const { return human_; }

  // Weld first (rows 0..2), then the stance-foot contact.
  ConstraintSet DomainConstraints(Vertex v, const Pose2& ground) const;
  // Ground contact of the prosthesis foot in pt, nothing in pw.
  ConstraintSet SubsystemConstraints(Vertex v, const Pose2& ground) const;
  FrameId StanceFoot(Vertex v) const;
  FrameId SwingFoot(Vertex v) const;
  RoleMap Roles(Vertex v) const;
  SeparableStructure Structure() const;

 private:
  AmputeeConfig config_;
  std::map<std::string, LinkParams> human_;
  std::unique_ptr<RobotModel> full_;
  std::unique_ptr<RobotModel> sub_;
  FullModelLayout layout_;
  SubsystemLayout sub_layout_;
};

// Copy of `model` whose residual-hip actuator also drives the socket
// rotation coordinate: a deliberately non-separable variant.
RobotModel WithSpanningActuator(const RobotModel& model);

// Socket rows of a full constraint wrench (weld rows come first).
VectorXd SocketRows(const VectorXd& wrench);

// T(x): (socket pose, socket velocity, x_s, F_f) with F_f from the constraint
// wrench at the applied input u. `wrench_sign` exists for counterexamples.
VectorXd MeasurementTransform(const AmputeeSystem& sys,
                              const ConstraintSet& constraints, const State& x,
                              const VectorXd& u, double wrench_sign = 1.0);

// Generalized force of the socket wrench on the subsystem coordinates:
// (R(phiB) F_f[0:2], F_f[2], 0, 0).
VectorXd SocketGeneralizedForce(const Vector3d& base_pose, const Vector3d& wrench);

// x = (q, v) stacked.
VectorXd Stack(const State& x);
State Split(const VectorXd& x, int n);

// ---------------------------------------------------------------------------
// Domain controllers.

// pt reads its phase from the state; pw takes it from outside.
bool IsTimePhase(Vertex v);

// Indices of the s-outputs within the six-output list.
std::vector<int> SubsystemOutputIndices(Vertex v);

struct FullControl {
  VectorXd u;
  VectorXd qdd;
  VectorXd wrench;  // all constraint rows
  TimePhase phase;
  VectorXd y;
  VectorXd y_dot;  // derivative of y for the degree-2 entries, 0 for y1
};

class AmputeeDomain {
 public:
  AmputeeDomain(const AmputeeSystem& sys, Vertex vertex, const VertexGait& gait,
                const Gains& gains, const Pose2& ground);

  Vertex vertex() const { return vertex_; }
  const ConstraintSet& constraints() const { return cs_; }
  const ConstraintSet& subsystem_constraints() const { return sub_cs_; }
  const OutputMaps& maps() const { return maps_; }
  const VertexGait& gait() const { return gait_; }
  const AmputeeSystem& system() const { return *sys_; }

  // --- full system, state x = (theta, theta_dot) in R^24.
  // Constrained affine form used by the full controller.
  AffineSystem ConstrainedSystem() const;
  // D qdd + H = B u + J^T F* with F* frozen at the applied input.
  AffineSystem SeparableSystem(std::function<VectorXd(const VectorXd&)> applied_u) const;
  // State-based phase (pt), or null for the time phase (pw) supplied by caller.
  OutputBundle Outputs(const TimePhase* external) const;
  VectorXd Mu(const VectorXd& x, const TimePhase& phase) const;
  TimePhase StatePhase(const State& x, const VectorXd& qdd = {}) const;
  FullControl Control(const State& x) const;
  // u_pw(x, T) for a given phase (pw only).
  VectorXd TimeControl(const State& x, const TimePhase& phase) const;

  // s-rows of the separable form at the applied input.
  SubsystemView FullSubsystemView(std::function<VectorXd(const VectorXd&)> applied_u) const;
  // f_s embedded in full coordinates (zero on x_r), for D3 checks.
  std::function<VectorXd(const VectorXd&)> EmbeddedSubsystemDrift(
      std::function<VectorXd(const VectorXd&)> applied_u) const;
  // u_ssc(x): the subsystem law evaluated on the full state.
  VectorXd SscControl(const State& x, const VectorXd& u_applied,
                      const TimePhase& phase) const;

  // --- prosthesis subsystem, local state x_s = (pk, pa, pk_dot, pa_dot).
  OutputBundle SubsystemOutputs(const TimePhase* external) const;
  // Same outputs over the full state (s-outputs of Outputs()).
  OutputBundle FullSubsystemOutputs(const TimePhase* external) const;
  VectorXd SubsystemMu(const VectorXd& xs, const TimePhase& phase) const;
  VectorXd SubsystemFeedforward(const TimePhase& phase) const;
  TimePhase SubsystemPhase(const VectorXd& xs, const TimePhase* external) const;
  // Constrained subsystem dynamics over the augmented vector.
  SubsystemView AugmentedView() const;
  // Nonlinear form with the ground force frozen at the applied u_s.
  SubsystemView AugmentedSeparableView(
      std::function<VectorXd(const VectorXd&)> applied_us) const;
  // u_s(X): reads only the augmented vector and the phase.
  VectorXd SubsystemControl(const VectorXd& augmented, const TimePhase* external) const;
  // Accelerations of (pk, pa) under the subsystem model at u_s.
  Eigen::Vector2d SubsystemAcceleration(const VectorXd& augmented,
                                        const VectorXd& us) const;

 private:
  OutputBundle BuildOutputs(const std::vector<int>& coords, const TimePhase* external,
                            const std::vector<int>& which) const;

  const AmputeeSystem* sys_;
  Vertex vertex_;
  VertexGait gait_;
  Gains gains_;
  ConstraintSet cs_;
  ConstraintSet sub_cs_;
  OutputMaps maps_;
  VectorXd tau_grad_;
};

// ---------------------------------------------------------------------------
// Sampling, walking and replay.

// Random state on the domain's constraint manifold near walking postures;
// the stance foot reference is taken from the sampled pose.
struct AdmissibleSample {
  State x;
  Pose2 ground;
};
AdmissibleSample SampleAdmissible(const AmputeeSystem& sys, Vertex v, std::mt19937& rng);

// State on the zeroing surface at tau = 0 of pt with y1 = 0, stance foot at
// the origin.
State InitialState(const AmputeeSystem& sys, const GaitParams& gait);

struct WalkOptions {
  IntegratorOptions integrator;
  double fall_fraction = 0.6;  // of leg length
  double arm_tau = 0.5;
  double domain_timeout = 3.0;
};

HybridSpec MakeWalkingSpec(const AmputeeSystem& sys, const GaitParams& gait,
                           const WalkOptions& options);

Trace SimulateWalk(const AmputeeSystem& sys, const GaitParams& gait,
                   const State& x0, int n_steps, const WalkOptions& options = {});

// Weighted distance between the states at consecutive pt entries: actuated
// joint angles (weight 1) and rates (weight 0.1 s). One value per pair.
std::vector<double> PoincareResiduals(const Trace& trace);
double PoincareDistance(const State& a, const State& b);

struct ReplayDomain {
  int step = 0;
  Vertex vertex = Vertex::kPt;
  int samples = 0;
  double max_state_error = 0.0;   // |x_s - xbar_s|_inf
  double max_output_error = 0.0;  // max |y_s| over degree-2 s-outputs
  bool reached_tau_end = false;
};

struct ReplaySample {
  double t = 0.0;
  int step = 0;
  Vertex vertex = Vertex::kPt;
  VectorXd xs_full;
  VectorXd xs_sub;
  VectorXd us;
  VectorXd ys;
};

struct ReplayResult {
  std::vector<ReplayDomain> domains;
  std::vector<ReplaySample> samples;
  double max_state_error = 0.0;
  double max_output_error = 0.0;
};

// Drives the subsystem closed loop with the boundary signals recorded in
// `trace` (interpolated), restarting every domain from the recorded
// post-impact x_s. Domains shorter than three samples are skipped.
ReplayResult ReplaySubsystem(const AmputeeSystem& sys, const GaitParams& gait,
                             const Trace& trace, double rtol = 1e-10,
                             double atol = 1e-12);

void WriteReplayCsv(const ReplayResult& replay, const std::string& path);

// Local polynomial interpolation through up to six neighboring knots.
double InterpolateKnots(const std::vector<double>& t, const std::vector<double>& y,
                        double at);

// Sum of the distances between consecutive pt entries over `cycles` full
// cycles (pt then pw) from InitialState. A gait whose start state sits on a
// contracting orbit scores low; a diverging one does not.
double CycleResidual(const AmputeeSystem& sys, const GaitParams& gait, int cycles = 3,
                     const WalkOptions& options = {});

// ---------------------------------------------------------------------------
// Verification battery on sampled admissible states.

struct DomainSamples {
  Pose2 ground;
  std::vector<State> states;  // all on one ground reference
};
DomainSamples SampleDomain(const AmputeeSystem& sys, Vertex v, int n, std::mt19937& rng);

struct VerifyOptions {
  int samples = 200;
  std::uint32_t seed = 1;
  double separability_tol = 1e-10;
  double equivalence_tol = 1e-8;
  double output_tol = 1e-6;
  double law_tol = 1e-8;
};

struct DomainVerification {
  Vertex vertex = Vertex::kPt;
  CheckReport separability;
  CheckReport equivalence;    // subsystem dynamics at T(x)
  OutputConditionReport outputs;
  CheckReport ssc_law;        // u_s(x) vs u_ssc(x), scaled by 1 + |u|
  CheckReport measured_law;   // u_s(x) vs ubar_s(T(x)), absolute

  bool passed() const {
    return separability.passed && equivalence.passed && outputs.passed() &&
           ssc_law.passed && measured_law.passed;
  }
};

std::vector<DomainVerification> Verify(const AmputeeSystem& sys, const GaitParams& gait,
                                       const VerifyOptions& options);

}  // namespace sepsim

#endif  // SEPSIM_PROSTHESIS_HPP_
