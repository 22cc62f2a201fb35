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

// Planar rigid-body tree dynamics.
//
// Conventions: the plane is (x, z) with z up. Every angle is measured
// counterclockwise; a link with absolute angle phi points along
// R(phi) * (0, -1) = (sin phi, -cos phi), so at theta = 0 a chain with zero
// axis offsets hangs straight down. Generalized coordinates are laid out body
// by body in model order: a planar base contributes (x, z, phi), a revolute
// joint one angle, a fixed-3dof joint (dx, dz, dphi) measured in the parent
// frame.

#ifndef SEPSIM_MULTIBODY_HPP_
#define SEPSIM_MULTIBODY_HPP_

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sepsim/error.hpp"

namespace sepsim {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

struct LinkParams {
  double mass = 1.0;        // kg
  double length = 1.0;      // m
  double com_offset = 0.5;  // m, from the proximal joint along the link axis
  double inertia = 0.0;     // kg m^2 about the COM
};

enum class JointKind { kPlanarBase, kRevolute, kFixed3Dof };

int JointDofs(JointKind kind);

struct BodySpec {
  std::string name;
  LinkParams link;
  JointKind joint = JointKind::kRevolute;
  int parent = -1;           // index of parent body, -1 for the root
  double attach = 0.0;       // joint location along the parent's link axis (m)
  double axis_offset = 0.0;  // link axis direction relative to the body frame
};

// Extra frame rigidly attached to a body, offset in body coordinates.
struct FrameSpec {
  std::string name;
  int body = 0;
  Vector2d offset = Vector2d::Zero();
};

struct FrameId {
  int index = -1;
  friend bool operator==(FrameId, FrameId) = default;
};

// World-frame planar pose.
struct Pose2 {
  double x = 0.0;
  double z = 0.0;
  double phi = 0.0;

  Vector3d vec() const { return {x, z, phi}; }
  static Pose2 FromVec(const Vector3d& v) { return {v(0), v(1), v(2)}; }
};

struct State {
  VectorXd q;
  VectorXd v;
};

// Immutable after construction; safe to share across threads.
class RobotModel {
 public:
  // Bodies must be topologically ordered (parent index < child index) with a
  // single planar-base root at index 0. Each body gets an origin frame named
  // after it; `extra_frames` adds named points on bodies.
  RobotModel(std::vector<BodySpec> bodies, MatrixXd actuation, double gravity,
             std::vector<FrameSpec> extra_frames = {});

  int dof() const { return dof_; }
  int num_inputs() const { return static_cast<int>(actuation_.cols()); }
  int num_bodies() const { return static_cast<int>(bodies_.size()); }
  double gravity() const { return gravity_; }
  const MatrixXd& actuation() const { return actuation_; }
  const BodySpec& body(int i) const { return bodies_[i]; }
  const std::vector<BodySpec>& bodies() const { return bodies_; }

  // Index of the first generalized coordinate owned by body i.
  int coord_index(int body) const { return coord_start_[body]; }
  int body_index(std::string_view name) const;

  FrameId frame(std::string_view name) const;
  const FrameSpec& frame_spec(FrameId id) const;
  int num_frames() const { return static_cast<int>(frames_.size()); }

  // Bodies on the path root -> body (inclusive), root first.
  const std::vector<int>& ancestors(int body) const { return ancestors_[body]; }

  double total_mass() const;

 private:
  std::vector<BodySpec> bodies_;
  std::vector<FrameSpec> frames_;
  std::vector<int> coord_start_;
  std::vector<std::vector<int>> ancestors_;
  MatrixXd actuation_;
  double gravity_;
  int dof_ = 0;
};

// Positions/velocities of every body frame for one (q, v).
struct Kinematics {
  std::vector<Vector2d> origin;      // world position of each body frame
  std::vector<double> angle;         // absolute angle of each body frame
  std::vector<Vector2d> joint_site;  // where the body's joint sits on the parent
  std::vector<double> parent_angle;  // absolute angle of the parent frame
};

Kinematics ComputeKinematics(const RobotModel& model, const VectorXd& q);

// 3 x dof Jacobian of a point rigidly attached to `body` (rows x, z, phi).
MatrixXd PointJacobian(const RobotModel& model, const Kinematics& kin,
                       int body, const Vector2d& point);
// d/dt of PointJacobian along v.
MatrixXd PointJacobianDot(const RobotModel& model, const Kinematics& kin,
                          const VectorXd& v, int body, const Vector2d& point);

MatrixXd MassMatrix(const RobotModel& model, const VectorXd& q);
// Christoffel-consistent C(q, v): D_dot - 2C is skew-symmetric.
MatrixXd CoriolisMatrix(const RobotModel& model, const VectorXd& q,
                        const VectorXd& v);
VectorXd GravityVector(const RobotModel& model, const VectorXd& q);
// H(q, v) = C(q, v) v + G(q).
VectorXd BiasForces(const RobotModel& model, const VectorXd& q,
                    const VectorXd& v);

Pose2 ForwardKinematics(const RobotModel& model, FrameId frame,
                        const VectorXd& q);
MatrixXd FrameJacobian(const RobotModel& model, FrameId frame,
                       const VectorXd& q);
// J_dot(q, v) * v for the frame.
Vector3d FrameBiasAcceleration(const RobotModel& model, FrameId frame,
                               const VectorXd& q, const VectorXd& v);
// World-frame (x, z) of a body's center of mass.
Vector2d CenterOfMass(const RobotModel& model, const Kinematics& kin,
                      int body);

struct Energy {
  double kinetic = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + potential; }
};

Energy ComputeEnergy(const RobotModel& model, const VectorXd& q,
                     const VectorXd& v);

// ---------------------------------------------------------------------------
// Holonomic constraints.

// Pins the world pose of `frame` to `reference` (3 rows).
struct GroundContact {
  FrameId frame;
  Pose2 reference;
};

// Pins the pose of `child` expressed in `parent` to `reference` (3 rows).
// Rows and wrench are resolved in the parent frame.
struct FrameWeld {
  FrameId child;
  FrameId parent;
  Pose2 reference;
};

using Constraint = std::variant<GroundContact, FrameWeld>;

struct ConstraintSet {
  std::vector<Constraint> items;

  int rows() const { return 3 * static_cast<int>(items.size()); }
  bool empty() const { return items.empty(); }
};

struct ConstraintData {
  MatrixXd jacobian;  // J, rows x dof
  VectorXd bias;      // J_dot * v
};

ConstraintData EvaluateConstraints(const RobotModel& model,
                                   const ConstraintSet& constraints,
                                   const VectorXd& q, const VectorXd& v,
                                   bool check_rank = true);

// h(q) - reference for every row.
VectorXd ConstraintResidual(const RobotModel& model,
                            const ConstraintSet& constraints,
                            const VectorXd& q);

// F(u) = lambda_f + lambda_g u.
struct WrenchSplit {
  VectorXd lambda_f;
  MatrixXd lambda_g;

  VectorXd Evaluate(const VectorXd& u) const { return lambda_f + lambda_g * u; }
};

struct ConstraintWrench {
  VectorXd force;
  WrenchSplit split;
};

// `external` is an optional generalized force added to the right-hand side:
// D qdd + H = B u + J^T F + external.
ConstraintWrench ComputeConstraintWrench(const RobotModel& model,
                                         const ConstraintSet& constraints,
                                         const VectorXd& q, const VectorXd& v,
                                         const VectorXd& u,
                                         const VectorXd& external = {});

// Constrained dynamics written affine in u: qdd = drift + input * u.
struct AffineAcceleration {
  VectorXd drift;
  MatrixXd input;
  WrenchSplit wrench;
};

AffineAcceleration ConstrainedAffineDynamics(const RobotModel& model,
                                             const ConstraintSet& constraints,
                                             const VectorXd& q,
                                             const VectorXd& v,
                                             const VectorXd& external = {});

// Substitution path: qdd = D^{-1}(-H + B u + J^T F) with F from
// ComputeConstraintWrench.
VectorXd ForwardDynamics(const RobotModel& model,
                         const ConstraintSet& constraints, const VectorXd& q,
                         const VectorXd& v, const VectorXd& u,
                         const VectorXd& external = {});

struct KktSolution {
  VectorXd qdd;
  VectorXd force;
};

// Solves [D -J^T; J 0][qdd; F] = [-H + B u + external; -J_dot v] directly.
KktSolution ForwardDynamicsKkt(const RobotModel& model,
                               const ConstraintSet& constraints,
                               const VectorXd& q, const VectorXd& v,
                               const VectorXd& u,
                               const VectorXd& external = {});

// Numerical rank with relative singular-value threshold 1e-10 * sigma_max.
int NumericalRank(const MatrixXd& m, double relative_threshold = 1e-10);

// Projects (q, v) onto the constraint manifold: Newton iterations on the
// position residual, then a mass-weighted velocity projection. Returns true
// if the state was modified.
bool ProjectOntoConstraints(const RobotModel& model,
                            const ConstraintSet& constraints, State& state,
                            double tolerance = 1e-10);

// Rotation by angle phi acting on (x, z).
Eigen::Matrix2d Rotation(double phi);

}  // namespace sepsim

#endif  // SEPSIM_MULTIBODY_HPP_
