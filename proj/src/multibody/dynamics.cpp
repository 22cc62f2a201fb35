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

#include "sepsim/multibody.hpp"

namespace sepsim {
namespace {

Vector2d Perp(const Vector2d& a) { return {-a.y(), a.x()}; }

Vector2d AxisDirection(double angle) {
  return {std::sin(angle), -std::cos(angle)};
}

void CheckDims(const RobotModel& model, const VectorXd& q) {
  if (q.size() != model.dof()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(model.dof()) +
                    " coordinates, got " + std::to_string(q.size()));
  }
}

void CheckDims(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  CheckDims(model, q);
  if (v.size() != model.dof()) {
    throw Error(ErrorKind::kDimensionMismatch, "velocity dimension mismatch");
  }
}

// Linear and angular velocity of every body frame origin.
struct BodyVelocities {
  std::vector<Vector2d> linear;
  std::vector<double> angular;
};

BodyVelocities ComputeBodyVelocities(const RobotModel& model,
                                     const Kinematics& kin,
                                     const VectorXd& v) {
  const int n = model.num_bodies();
  BodyVelocities out;
  out.linear.resize(n);
  out.angular.resize(n);
  for (int i = 0; i < n; ++i) {
    const BodySpec& b = model.body(i);
    const int s = model.coord_index(i);
    if (b.joint == JointKind::kPlanarBase) {
      out.linear[i] = {v(s), v(s + 1)};
      out.angular[i] = v(s + 2);
      continue;
    }
    const int p = b.parent;
    const Vector2d& op = kin.origin[p];
    const double wp = out.angular[p];
    const Vector2d site_vel =
        out.linear[p] + wp * Perp(kin.joint_site[i] - op);
    if (b.joint == JointKind::kRevolute) {
      out.linear[i] = site_vel;
      out.angular[i] = wp + v(s);
    } else {
      const Eigen::Matrix2d r = Rotation(kin.parent_angle[i]);
      out.linear[i] = site_vel + wp * Perp(kin.origin[i] - kin.joint_site[i]) +
                      r * Vector2d(v(s), v(s + 1));
      out.angular[i] = wp + v(s + 2);
    }
  }
  return out;
}

MatrixXd PointJacobianDotImpl(const RobotModel& model, const Kinematics& kin,
                              const BodyVelocities& bv, int body,
                              const Vector2d& point, const Vector2d& point_vel) {
  MatrixXd jd = MatrixXd::Zero(3, model.dof());
  for (int a : model.ancestors(body)) {
    const BodySpec& b = model.body(a);
    const int s = model.coord_index(a);
    const Vector2d rel_vel = point_vel - bv.linear[a];
    switch (b.joint) {
      case JointKind::kPlanarBase:
        jd.block<2, 1>(0, s + 2) = Perp(rel_vel);
        break;
      case JointKind::kRevolute:
        jd.block<2, 1>(0, s) = Perp(rel_vel);
        break;
      case JointKind::kFixed3Dof: {
        const Eigen::Matrix2d r = Rotation(kin.parent_angle[a]);
        const double wp = bv.angular[b.parent];
        jd.block<2, 1>(0, s) = wp * Perp(r.col(0));
        jd.block<2, 1>(0, s + 1) = wp * Perp(r.col(1));
        jd.block<2, 1>(0, s + 2) = Perp(rel_vel);
        break;
      }
    }
  }
  return jd;
}

Vector2d BodyPoint(const Kinematics& kin, int body, const Vector2d& offset) {
  return kin.origin[body] + Rotation(kin.angle[body]) * offset;
}

Vector2d PointVelocity(const Kinematics& kin, const BodyVelocities& bv,
                       int body, const Vector2d& point) {
  return bv.linear[body] + bv.angular[body] * Perp(point - kin.origin[body]);
}

}  // namespace

Kinematics ComputeKinematics(const RobotModel& model, const VectorXd& q) {
  CheckDims(model, q);
  const int n = model.num_bodies();
  Kinematics kin;
  kin.origin.resize(n);
  kin.angle.resize(n);
  kin.joint_site.resize(n);
  kin.parent_angle.resize(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const BodySpec& b = model.body(i);
    const int s = model.coord_index(i);
    if (b.joint == JointKind::kPlanarBase) {
      kin.origin[i] = {q(s), q(s + 1)};
      kin.angle[i] = q(s + 2);
      kin.joint_site[i] = kin.origin[i];
      continue;
    }
    const int p = b.parent;
    const BodySpec& pb = model.body(p);
    kin.parent_angle[i] = kin.angle[p];
    kin.joint_site[i] =
        kin.origin[p] + b.attach * AxisDirection(kin.angle[p] + pb.axis_offset);
    if (b.joint == JointKind::kRevolute) {
      kin.origin[i] = kin.joint_site[i];
      kin.angle[i] = kin.angle[p] + q(s);
    } else {
      kin.origin[i] =
          kin.joint_site[i] + Rotation(kin.angle[p]) * Vector2d(q(s), q(s + 1));
      kin.angle[i] = kin.angle[p] + q(s + 2);
    }
  }
  return kin;
}

MatrixXd PointJacobian(const RobotModel& model, const Kinematics& kin,
                       int body, const Vector2d& point) {
  MatrixXd j = MatrixXd::Zero(3, model.dof());
  for (int a : model.ancestors(body)) {
    const BodySpec& b = model.body(a);
    const int s = model.coord_index(a);
    const Vector2d rel = point - kin.origin[a];
    switch (b.joint) {
      case JointKind::kPlanarBase:
        j(0, s) = 1.0;
        j(1, s + 1) = 1.0;
        j.block<2, 1>(0, s + 2) = Perp(rel);
        j(2, s + 2) = 1.0;
        break;
      case JointKind::kRevolute:
        j.block<2, 1>(0, s) = Perp(rel);
        j(2, s) = 1.0;
        break;
      case JointKind::kFixed3Dof: {
        const Eigen::Matrix2d r = Rotation(kin.parent_angle[a]);
        j.block<2, 1>(0, s) = r.col(0);
        j.block<2, 1>(0, s + 1) = r.col(1);
        j.block<2, 1>(0, s + 2) = Perp(rel);
        j(2, s + 2) = 1.0;
        break;
      }
    }
  }
  return j;
}

MatrixXd PointJacobianDot(const RobotModel& model, const Kinematics& kin,
                          const VectorXd& v, int body, const Vector2d& point) {
  const BodyVelocities bv = ComputeBodyVelocities(model, kin, v);
  return PointJacobianDotImpl(model, kin, bv, body, point,
                              PointVelocity(kin, bv, body, point));
}

Vector2d CenterOfMass(const RobotModel& model, const Kinematics& kin,
                      int body) {
  const BodySpec& b = model.body(body);
  return kin.origin[body] +
         b.link.com_offset * AxisDirection(kin.angle[body] + b.axis_offset);
}

MatrixXd MassMatrix(const RobotModel& model, const VectorXd& q) {
  const Kinematics kin = ComputeKinematics(model, q);
  const int n = model.dof();
  MatrixXd d = MatrixXd::Zero(n, n);
  for (int i = 0; i < model.num_bodies(); ++i) {
    const LinkParams& l = model.body(i).link;
    const MatrixXd j = PointJacobian(model, kin, i, CenterOfMass(model, kin, i));
    d.noalias() += l.mass * j.topRows<2>().transpose() * j.topRows<2>();
    d.noalias() += l.inertia * j.row(2).transpose() * j.row(2);
  }
  return 0.5 * (d + d.transpose());
}

MatrixXd CoriolisMatrix(const RobotModel& model, const VectorXd& q,
                        const VectorXd& v) {
  CheckDims(model, q, v);
  const Kinematics kin = ComputeKinematics(model, q);
  const BodyVelocities bv = ComputeBodyVelocities(model, kin, v);
  const int n = model.dof();
  MatrixXd c = MatrixXd::Zero(n, n);
  // The angular Jacobian rows are constant, so only the translational part
  // contributes.
  for (int i = 0; i < model.num_bodies(); ++i) {
    const LinkParams& l = model.body(i).link;
    const Vector2d com = CenterOfMass(model, kin, i);
    const MatrixXd j = PointJacobian(model, kin, i, com);
    const MatrixXd jd = PointJacobianDotImpl(model, kin, bv, i, com,
                                             PointVelocity(kin, bv, i, com));
    c.noalias() += l.mass * j.topRows<2>().transpose() * jd.topRows<2>();
  }
  return c;
}

VectorXd GravityVector(const RobotModel& model, const VectorXd& q) {
  const Kinematics kin = ComputeKinematics(model, q);
  VectorXd g = VectorXd::Zero(model.dof());
  for (int i = 0; i < model.num_bodies(); ++i) {
    const MatrixXd j =
        PointJacobian(model, kin, i, CenterOfMass(model, kin, i));
    g.noalias() += model.body(i).link.mass * model.gravity() *
                   j.row(1).transpose();
  }
  return g;
}

VectorXd BiasForces(const RobotModel& model, const VectorXd& q,
                    const VectorXd& v) {
  CheckDims(model, q, v);
  const Kinematics kin = ComputeKinematics(model, q);
  const BodyVelocities bv = ComputeBodyVelocities(model, kin, v);
  VectorXd h = VectorXd::Zero(model.dof());
  for (int i = 0; i < model.num_bodies(); ++i) {
    const LinkParams& l = model.body(i).link;
    const Vector2d com = CenterOfMass(model, kin, i);
    const MatrixXd j = PointJacobian(model, kin, i, com);
    const MatrixXd jd = PointJacobianDotImpl(model, kin, bv, i, com,
                                             PointVelocity(kin, bv, i, com));
    const Vector2d acc_bias = jd.topRows<2>() * v;
    h.noalias() += l.mass * j.topRows<2>().transpose() * acc_bias;
    h.noalias() += l.mass * model.gravity() * j.row(1).transpose();
  }
  return h;
}

Pose2 ForwardKinematics(const RobotModel& model, FrameId frame,
                        const VectorXd& q) {
  const FrameSpec& f = model.frame_spec(frame);
  const Kinematics kin = ComputeKinematics(model, q);
  const Vector2d p = BodyPoint(kin, f.body, f.offset);
  return {p.x(), p.y(), kin.angle[f.body]};
}

MatrixXd FrameJacobian(const RobotModel& model, FrameId frame,
                       const VectorXd& q) {
  const FrameSpec& f = model.frame_spec(frame);
  const Kinematics kin = ComputeKinematics(model, q);
  return PointJacobian(model, kin, f.body, BodyPoint(kin, f.body, f.offset));
}

Vector3d FrameBiasAcceleration(const RobotModel& model, FrameId frame,
                               const VectorXd& q, const VectorXd& v) {
  CheckDims(model, q, v);
  const FrameSpec& f = model.frame_spec(frame);
  const Kinematics kin = ComputeKinematics(model, q);
  const BodyVelocities bv = ComputeBodyVelocities(model, kin, v);
  const Vector2d p = BodyPoint(kin, f.body, f.offset);
  const MatrixXd jd = PointJacobianDotImpl(model, kin, bv, f.body, p,
                                           PointVelocity(kin, bv, f.body, p));
  return jd * v;
}

Energy ComputeEnergy(const RobotModel& model, const VectorXd& q,
                     const VectorXd& v) {
  CheckDims(model, q, v);
  Energy e;
  e.kinetic = 0.5 * v.dot(MassMatrix(model, q) * v);
  const Kinematics kin = ComputeKinematics(model, q);
  for (int i = 0; i < model.num_bodies(); ++i) {
    e.potential += model.body(i).link.mass * model.gravity() *
                   CenterOfMass(model, kin, i).y();
  }
  return e;
}

}  // namespace sepsim
