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

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

VectorXd OrZero(const VectorXd& x, int n) {
  if (x.size() == 0) return VectorXd::Zero(n);
  if (x.size() != n) {
    throw Error(ErrorKind::kDimensionMismatch,
                "external force has wrong dimension");
  }
  return x;
}

void CheckInput(const RobotModel& model, const VectorXd& u) {
  if (u.size() != model.num_inputs()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(model.num_inputs()) +
                    " inputs, got " + std::to_string(u.size()));
  }
}

void CheckFinite(const VectorXd& x, const char* what) {
  if (!x.allFinite()) throw Error(ErrorKind::kNonFinite, what);
}

// Pose of `child` relative to `parent`, resolved in the parent frame.
Vector3d RelativePose(const Pose2& c, const Pose2& p) {
  const Vector2d d = Rotation(p.phi).transpose() * Vector2d(c.x - p.x, c.z - p.z);
  return {d.x(), d.y(), c.phi - p.phi};
}

// Shared pieces of the projected (reduced) constraint solve.
struct Reduced {
  Eigen::LLT<MatrixXd> mass;
  ConstraintData data;
  MatrixXd dinv_jt;                            // D^{-1} J^T
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> schur;  // J D^{-1} J^T
};

Reduced Reduce(const RobotModel& model, const ConstraintSet& cs,
               const VectorXd& q, const VectorXd& v) {
  Reduced r;
  r.mass.compute(MassMatrix(model, q));
  if (r.mass.info() != Eigen::Success) {
    throw Error(ErrorKind::kRankDeficient, "mass matrix is not positive definite");
  }
  r.data = EvaluateConstraints(model, cs, q, v);
  if (!cs.empty()) {
    r.dinv_jt = r.mass.solve(r.data.jacobian.transpose());
    r.schur.compute(r.data.jacobian * r.dinv_jt);
  }
  return r;
}

}  // namespace

ConstraintData EvaluateConstraints(const RobotModel& model,
                                   const ConstraintSet& cs, const VectorXd& q,
                                   const VectorXd& v, bool check_rank) {
  if (q.size() != model.dof() || v.size() != model.dof()) {
    throw Error(ErrorKind::kDimensionMismatch, "state dimension mismatch");
  }
  ConstraintData out;
  out.jacobian = MatrixXd::Zero(cs.rows(), model.dof());
  out.bias = VectorXd::Zero(cs.rows());
  int row = 0;
  for (const Constraint& c : cs.items) {
    std::visit(
        Overloaded{
            [&](const GroundContact& g) {
              out.jacobian.middleRows<3>(row) =
                  FrameJacobian(model, g.frame, q);
              out.bias.segment<3>(row) =
                  FrameBiasAcceleration(model, g.frame, q, v);
            },
            [&](const FrameWeld& w) {
              const Pose2 pc = ForwardKinematics(model, w.child, q);
              const Pose2 pp = ForwardKinematics(model, w.parent, q);
              const MatrixXd jc = FrameJacobian(model, w.child, q);
              const MatrixXd jp = FrameJacobian(model, w.parent, q);
              const Eigen::Matrix2d rt = Rotation(pp.phi).transpose();
              const Vector2d local =
                  rt * Vector2d(pc.x - pp.x, pc.z - pp.z);
              const Vector2d pl = Perp(local);
              out.jacobian.middleRows<2>(row) =
                  rt * (jc.topRows<2>() - jp.topRows<2>()) - pl * jp.row(2);
              out.jacobian.row(row + 2) = jc.row(2) - jp.row(2);

              const Vector3d ac = FrameBiasAcceleration(model, w.child, q, v);
              const Vector3d ap = FrameBiasAcceleration(model, w.parent, q, v);
              const Vector2d dv = (jc.topRows<2>() - jp.topRows<2>()) * v;
              const double wp = jp.row(2).dot(v);
              out.bias.segment<2>(row) =
                  rt * (ac.head<2>() - ap.head<2>()) -
                  2.0 * wp * Perp(rt * dv) - wp * wp * local;
              out.bias(row + 2) = ac(2) - ap(2);
            }},
        c);
    row += 3;
  }
  if (check_rank && cs.rows() > 0 &&
      NumericalRank(out.jacobian) < cs.rows()) {
    throw Error(ErrorKind::kRankDeficient,
                "constraint Jacobian has rank " +
                    std::to_string(NumericalRank(out.jacobian)) + " < " +
                    std::to_string(cs.rows()));
  }
  return out;
}

VectorXd ConstraintResidual(const RobotModel& model, const ConstraintSet& cs,
                            const VectorXd& q) {
  VectorXd r(cs.rows());
  int row = 0;
  for (const Constraint& c : cs.items) {
    std::visit(Overloaded{
                   [&](const GroundContact& g) {
                     r.segment<3>(row) =
                         ForwardKinematics(model, g.frame, q).vec() -
                         g.reference.vec();
                   },
                   [&](const FrameWeld& w) {
                     r.segment<3>(row) =
                         RelativePose(ForwardKinematics(model, w.child, q),
                                      ForwardKinematics(model, w.parent, q)) -
                         w.reference.vec();
                   }},
               c);
    row += 3;
  }
  return r;
}

ConstraintWrench ComputeConstraintWrench(const RobotModel& model,
                                         const ConstraintSet& cs,
                                         const VectorXd& q, const VectorXd& v,
                                         const VectorXd& u,
                                         const VectorXd& external) {
  CheckInput(model, u);
  const VectorXd ext = OrZero(external, model.dof());
  ConstraintWrench out;
  if (cs.empty()) {
    out.force.resize(0);
    out.split.lambda_f.resize(0);
    out.split.lambda_g.resize(0, model.num_inputs());
    return out;
  }
  const Reduced r = Reduce(model, cs, q, v);
  const VectorXd h = BiasForces(model, q, v);
  const MatrixXd jdinv = r.dinv_jt.transpose();  // J D^{-1} (D symmetric)
  out.split.lambda_f = r.schur.solve(jdinv * (h - ext) - r.data.bias);
  out.split.lambda_g = -r.schur.solve(jdinv * model.actuation());
  out.force = out.split.Evaluate(u);
  CheckFinite(out.force, "constraint wrench");
  return out;
}

AffineAcceleration ConstrainedAffineDynamics(const RobotModel& model,
                                             const ConstraintSet& cs,
                                             const VectorXd& q,
                                             const VectorXd& v,
                                             const VectorXd& external) {
  const VectorXd ext = OrZero(external, model.dof());
  const Reduced r = Reduce(model, cs, q, v);
  const VectorXd h = BiasForces(model, q, v);
  AffineAcceleration out;
  if (cs.empty()) {
    out.drift = r.mass.solve(ext - h);
    out.input = r.mass.solve(model.actuation());
    out.wrench.lambda_f.resize(0);
    out.wrench.lambda_g.resize(0, model.num_inputs());
  } else {
    const MatrixXd jdinv = r.dinv_jt.transpose();
    out.wrench.lambda_f = r.schur.solve(jdinv * (h - ext) - r.data.bias);
    out.wrench.lambda_g = -r.schur.solve(jdinv * model.actuation());
    out.drift = r.mass.solve(ext - h) + r.dinv_jt * out.wrench.lambda_f;
    out.input =
        r.mass.solve(model.actuation()) + r.dinv_jt * out.wrench.lambda_g;
  }
  CheckFinite(out.drift, "constrained drift");
  return out;
}

VectorXd ForwardDynamics(const RobotModel& model, const ConstraintSet& cs,
                         const VectorXd& q, const VectorXd& v,
                         const VectorXd& u, const VectorXd& external) {
  CheckInput(model, u);
  const VectorXd ext = OrZero(external, model.dof());
  Eigen::LLT<MatrixXd> mass(MassMatrix(model, q));
  if (mass.info() != Eigen::Success) {
    throw Error(ErrorKind::kRankDeficient, "mass matrix is not positive definite");
  }
  VectorXd rhs = model.actuation() * u + ext - BiasForces(model, q, v);
  if (!cs.empty()) {
    const ConstraintWrench w = ComputeConstraintWrench(model, cs, q, v, u, ext);
    rhs += EvaluateConstraints(model, cs, q, v, false).jacobian.transpose() *
           w.force;
  }
  VectorXd qdd = mass.solve(rhs);
  CheckFinite(qdd, "acceleration");
  return qdd;
}

KktSolution ForwardDynamicsKkt(const RobotModel& model, const ConstraintSet& cs,
                               const VectorXd& q, const VectorXd& v,
                               const VectorXd& u, const VectorXd& external) {
  CheckInput(model, u);
  const VectorXd ext = OrZero(external, model.dof());
  const int n = model.dof();
  const int m = cs.rows();
  const ConstraintData data = EvaluateConstraints(model, cs, q, v);
  MatrixXd k = MatrixXd::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = MassMatrix(model, q);
  k.topRightCorner(n, m) = -data.jacobian.transpose();
  k.bottomLeftCorner(m, n) = data.jacobian;
  VectorXd rhs(n + m);
  rhs.head(n) = model.actuation() * u + ext - BiasForces(model, q, v);
  rhs.tail(m) = -data.bias;
  const VectorXd sol = k.fullPivLu().solve(rhs);
  CheckFinite(sol, "KKT solution");
  return {sol.head(n), sol.tail(m)};
}

bool ProjectOntoConstraints(const RobotModel& model, const ConstraintSet& cs,
                            State& state, double tolerance) {
  if (cs.empty()) return false;
  bool modified = false;
  for (int it = 0; it < 20; ++it) {
    const VectorXd r = ConstraintResidual(model, cs, state.q);
    if (r.lpNorm<Eigen::Infinity>() <= tolerance) break;
    const MatrixXd j =
        EvaluateConstraints(model, cs, state.q, state.v, false).jacobian;
    state.q -= j.transpose() * (j * j.transpose()).ldlt().solve(r);
    modified = true;
  }
  const MatrixXd j =
      EvaluateConstraints(model, cs, state.q, state.v, false).jacobian;
  const VectorXd jv = j * state.v;
  if (jv.lpNorm<Eigen::Infinity>() > tolerance) {
    Eigen::LLT<MatrixXd> mass(MassMatrix(model, state.q));
    const MatrixXd dinv_jt = mass.solve(j.transpose());
    state.v -= dinv_jt * (j * dinv_jt).ldlt().solve(jv);
    modified = true;
  }
  return modified;
}

}  // namespace sepsim
