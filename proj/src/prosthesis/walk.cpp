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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sepsim/prosthesis.hpp"

namespace sepsim {
namespace {

using L = FullModelLayout;
using A = AugmentedLayout;

constexpr int kN = L::kEta;
const int kJoints[] = {L::kLh, L::kLk, L::kLa, L::kRh, L::kPk, L::kPa};

double U(std::mt19937& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

AdmissibleSample SampleAdmissible(const AmputeeSystem& sys, Vertex v, std::mt19937& rng) {
  State x{VectorXd::Zero(kN), VectorXd::Zero(kN)};
  x.q(L::kX) = U(rng, -1.0, 1.0);
  x.q(L::kZ) = U(rng, 0.6, 1.0);
  x.q(L::kPhi) = U(rng, -0.2, 0.2);
  x.q(L::kLh) = U(rng, -0.5, 0.5);
  x.q(L::kLk) = U(rng, -1.0, 0.0);
  x.q(L::kLa) = U(rng, -0.4, 0.4);
  x.q(L::kRh) = U(rng, -0.5, 0.5);
  x.q(L::kPk) = U(rng, -0.6, 0.0);
  x.q(L::kPa) = U(rng, -0.4, 0.4);
  for (int i = 0; i < kN; ++i) {
    if (i < L::kFx || i > L::kFphi) x.v(i) = U(rng, -1.0, 1.0);
  }
  AdmissibleSample s;
  s.ground = ForwardKinematics(sys.full(), sys.StanceFoot(v), x.q);
  ProjectOntoConstraints(sys.full(), sys.DomainConstraints(v, s.ground), x, 1e-13);
  s.x = x;
  return s;
}

State InitialState(const AmputeeSystem& sys, const GaitParams& gait) {
  const RobotModel& m = sys.full();
  const OutputMaps maps = MakeOutputMaps(sys.Roles(Vertex::kPt), kN);
  const VertexGait& g = gait.pt;

  // Joint angles from y2 = 0 and tau = 0: c2 theta = alpha[:,0], hip = dp+.
  MatrixXd M(6, 6);
  VectorXd rhs(6);
  for (int j = 0; j < 6; ++j) {
    for (int r = 0; r < kNumDegreeTwo; ++r) M(r, j) = maps.c2(r, kJoints[j]);
    M(5, j) = maps.hip_row(kJoints[j]);
  }
  rhs << g.alpha.col(0), g.dp_plus;
  const VectorXd joints = M.fullPivLu().solve(rhs);

  State x{VectorXd::Zero(kN), VectorXd::Zero(kN)};
  for (int j = 0; j < 6; ++j) x.q(kJoints[j]) = joints(j);
  const FrameId foot = sys.StanceFoot(Vertex::kPt);
  x.q(L::kPhi) = -ForwardKinematics(m, foot, x.q).phi;
  const Pose2 p = ForwardKinematics(m, foot, x.q);
  x.q(L::kX) = -p.x;
  x.q(L::kZ) = -p.z;

  // Velocities: constraints, y1 = 0, ydot2 = 0.
  const ConstraintSet cs = sys.DomainConstraints(Vertex::kPt, Pose2{});
  const MatrixXd J = EvaluateConstraints(m, cs, x.q, x.v).jacobian;
  const VectorXd tg = PhaseGradient(maps, g);
  MatrixXd K(2 * 6, kN);
  VectorXd b = VectorXd::Zero(12);
  K.topRows(6) = J;
  K.row(6) = maps.hip_row.transpose();
  b(6) = g.v_hip;
  for (int r = 0; r < kNumDegreeTwo; ++r) {
    const double db = BezierEval(g.alpha.row(r).transpose(), 0.0, 1);
    K.row(7 + r) = maps.c2.row(r) - db * tg.transpose();
  }
  x.v = K.fullPivLu().solve(b);
  if (!((K * x.v - b).norm() <= 1e-9 * (1.0 + b.norm()))) {
    throw Error(ErrorKind::kConfig, "gait start does not define a consistent initial state");
  }
  return x;
}

HybridSpec MakeWalkingSpec(const AmputeeSystem& sys, const GaitParams& gait,
                           const WalkOptions& opt) {
  HybridSpec spec;
  spec.domain_timeout = opt.domain_timeout;
  const AmputeeSystem* s = &sys;
  spec.enter = [s, gait, opt](Vertex v, const State& entry, int) {
    const OutputMaps maps = MakeOutputMaps(s->Roles(v), kN);
    const VertexGait matched = BoundaryMatch(gait.at(v), maps, entry.q, entry.v);
    const Pose2 ground = ForwardKinematics(s->full(), s->StanceFoot(v), entry.q);
    auto dom = std::make_shared<AmputeeDomain>(*s, v, matched, gait.gains, ground);
    DomainSpec d;
    d.vertex = v;
    d.constraints = dom->constraints();
    d.closed_loop = [dom](const State& x) {
      const FullControl c = dom->Control(x);
      ClosedLoopEval e;
      e.qdd = c.qdd;
      e.u = c.u;
      e.coupling = SocketRows(c.wrench);
      e.phase = c.phase;
      e.outputs = c.y;
      return e;
    };
    const FrameId swing = s->SwingFoot(v);
    const double floor = ground.z;
    d.guard = [s, swing, floor](const State& x) {
      return ForwardKinematics(s->full(), swing, x.q).z - floor;
    };
    const double arm = opt.arm_tau;
    d.armed = [dom, arm](const State& x) { return dom->StatePhase(x).tau >= arm; };
    const double min_height = opt.fall_fraction * s->layout().leg_length;
    d.monitor = [min_height, floor](const State& x) {
      if (x.q(L::kZ) - floor < min_height) {
        throw Error(ErrorKind::kFall,
                    fmt::format("hip height {:.4f} m below {:.4f} m", x.q(L::kZ) - floor,
                                min_height));
      }
    };
    return d;
  };
  spec.post_impact_constraints = [s](Vertex from, const State& pre) {
    const Vertex next = NextVertex(from);
    return s->DomainConstraints(next,
                                ForwardKinematics(s->full(), s->StanceFoot(next), pre.q));
  };
  return spec;
}

Trace SimulateWalk(const AmputeeSystem& sys, const GaitParams& gait, const State& x0,
                   int n_steps, const WalkOptions& options) {
  return StepCycle(sys.full(), MakeWalkingSpec(sys, gait, options), Vertex::kPt, x0,
                   n_steps, options.integrator);
}

double PoincareDistance(const State& a, const State& b) {
  double s = 0.0;
  for (int j : kJoints) {
    const double dq = a.q(j) - b.q(j);
    const double dv = 0.1 * (a.v(j) - b.v(j));
    s += dq * dq + dv * dv;
  }
  return std::sqrt(s);
}

std::vector<double> PoincareResiduals(const Trace& trace) {
  std::vector<State> entries;
  for (const DomainRecord& d : trace.domains) {
    if (d.vertex != Vertex::kPt || d.end_sample <= d.first_sample) continue;
    const TraceSample& s = trace.samples[d.first_sample];
    entries.push_back(State{s.q, s.v});
  }
  if (!trace.impacts.empty() && trace.final_vertex == Vertex::kPt &&
      trace.final_state.q.size() == kN) {
    entries.push_back(trace.final_state);
  }
  std::vector<double> out;
  for (size_t i = 1; i < entries.size(); ++i) {
    out.push_back(PoincareDistance(entries[i - 1], entries[i]));
  }
  return out;
}

double CycleResidual(const AmputeeSystem& sys, const GaitParams& gait, int cycles,
                     const WalkOptions& options) {
  if (cycles < 1) throw Error(ErrorKind::kPrecondition, "need at least one cycle");
  const State x0 = InitialState(sys, gait);
  const Trace tr = SimulateWalk(sys, gait, x0, 2 * cycles, options);
  double sum = 0.0;
  for (double r : PoincareResiduals(tr)) sum += r;
  return sum;
}

double InterpolateKnots(const std::vector<double>& t, const std::vector<double>& y,
                        double at) {
  const int n = static_cast<int>(t.size());
  if (n == 0 || y.size() != t.size()) {
    throw Error(ErrorKind::kPrecondition, "interpolation needs matching knots");
  }
  if (n == 1) return y[0];
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  int i = static_cast<int>(it - t.begin()) - 1;  // t[i] <= at < t[i+1]
  i = std::clamp(i, 0, n - 2);
  if (t[i] == at) return y[i];
  if (t[i + 1] == at) return y[i + 1];
  const int width = std::min(n, 6);
  int lo = std::clamp(i - 2, 0, n - width);
  double sum = 0.0;
  for (int a = lo; a < lo + width; ++a) {
    double w = 1.0;
    for (int b = lo; b < lo + width; ++b) {
      if (b != a) w *= (at - t[b]) / (t[a] - t[b]);
    }
    sum += w * y[a];
  }
  return sum;
}

namespace {

// Rebuilds the s-rows of the gait from subsystem-side data at domain start.
VertexGait MatchSubsystemGait(const VertexGait& gait, Vertex v, const OutputMaps& maps,
                              const VectorXd& xs, const TimePhase& recorded) {
  VertexGait out = gait;
  const double hip = maps.hip_row(L::kPk) * xs(0) + maps.hip_row(L::kPa) * xs(1);
  double tau_dot = recorded.tau_dot;
  if (v == Vertex::kPt) {
    out.dp_plus = hip;
    tau_dot = (maps.hip_row(L::kPk) * xs(2) + maps.hip_row(L::kPa) * xs(3)) /
              (out.dp_minus - out.dp_plus);
  }
  if (!(tau_dot > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "replay: phase not advancing at domain start");
  }
  for (int idx : SubsystemOutputIndices(v)) {
    if (idx == 0) continue;
    const int r = idx - 1;
    const double y = maps.c2(r, L::kPk) * xs(0) + maps.c2(r, L::kPa) * xs(1);
    const double yd = maps.c2(r, L::kPk) * xs(2) + maps.c2(r, L::kPa) * xs(3);
    out.alpha(r, 0) = y;
    out.alpha(r, 1) = y + yd / (kBezierOrder * tau_dot);
  }
  return out;
}

}  // namespace

ReplayResult ReplaySubsystem(const AmputeeSystem& sys, const GaitParams& gait,
                             const Trace& trace, double rtol, double atol) {
  namespace odeint = boost::numeric::odeint;
  using Vec = std::vector<double>;
  if (trace.samples.empty()) throw Error(ErrorKind::kSchema, "replay: empty trace");
  const RobotModel& m = sys.full();
  const FrameId socket = sys.layout().socket;
  ReplayResult result;

  for (const DomainRecord& d : trace.domains) {
    const int n = d.end_sample - d.first_sample;
    if (n < 3) continue;
    const Vertex v = d.vertex;
    const bool tp = IsTimePhase(v);

    // Knots of the boundary signals.
    std::vector<double> t(n);
    std::vector<std::vector<double>> sig(12, std::vector<double>(n));
    std::vector<VectorXd> xs_full(n);
    for (int k = 0; k < n; ++k) {
      const TraceSample& s = trace.samples[d.first_sample + k];
      if (s.q.size() != kN || s.v.size() != kN || s.coupling.size() != 3) {
        throw Error(ErrorKind::kSchema, "replay: trace columns do not match the model");
      }
      t[k] = s.t;
      const Vector3d pose = ForwardKinematics(m, socket, s.q).vec();
      const Vector3d vel = FrameJacobian(m, socket, s.q) * s.v;
      for (int c = 0; c < 3; ++c) {
        sig[c][k] = pose(c);
        sig[3 + c][k] = vel(c);
        sig[6 + c][k] = s.coupling(c);
      }
      sig[9][k] = s.phase.tau;
      sig[10][k] = s.phase.tau_dot;
      sig[11][k] = s.phase.tau_ddot;
      xs_full[k] = Eigen::Vector4d(s.q(L::kPk), s.q(L::kPa), s.v(L::kPk), s.v(L::kPa));
    }
    for (int k = 1; k < n; ++k) {
      if (!(t[k] > t[k - 1])) throw Error(ErrorKind::kSchema, "replay: time not increasing");
    }

    const TraceSample& first = trace.samples[d.first_sample];
    const OutputMaps maps = MakeOutputMaps(sys.Roles(v), kN);
    const VertexGait matched = MatchSubsystemGait(gait.at(v), v, maps, xs_full[0], first.phase);
    const AmputeeDomain dom(sys, v, matched, gait.gains, Pose2{});

    auto boundary = [&](double at, const VectorXd& xs, TimePhase& phase) {
      VectorXd X(A::kSize);
      for (int c = 0; c < 6; ++c) X(c) = InterpolateKnots(t, sig[c], at);
      X.segment<4>(A::kXs) = xs;
      for (int c = 0; c < 3; ++c) X(A::kWrench + c) = InterpolateKnots(t, sig[6 + c], at);
      phase.tau = InterpolateKnots(t, sig[9], at);
      phase.tau_dot = InterpolateKnots(t, sig[10], at);
      phase.tau_ddot = InterpolateKnots(t, sig[11], at);
      return X;
    };

    auto rhs = [&](const Vec& s, Vec& ds, double at) {
      const VectorXd xs = Eigen::Map<const VectorXd>(s.data(), 4);
      TimePhase phase;
      const VectorXd X = boundary(at, xs, phase);
      const VectorXd us = dom.SubsystemControl(X, tp ? &phase : nullptr);
      const Eigen::Vector2d acc = dom.SubsystemAcceleration(X, us);
      ds = {xs(2), xs(3), acc(0), acc(1)};
    };

    ReplayDomain rd;
    rd.step = d.step;
    rd.vertex = v;
    bool stopped = false;
    auto observe = [&](const Vec& s, double at) {
      if (stopped) return;
      const VectorXd xs = Eigen::Map<const VectorXd>(s.data(), 4);
      TimePhase phase;
      const VectorXd X = boundary(at, xs, phase);
      const TimePhase p = dom.SubsystemPhase(xs, tp ? &phase : nullptr);
      const int k = static_cast<int>(std::lower_bound(t.begin(), t.end(), at) - t.begin());
      ReplaySample rs;
      rs.t = at;
      rs.step = d.step;
      rs.vertex = v;
      rs.xs_full = xs_full[std::min(k, n - 1)];
      rs.xs_sub = xs;
      rs.us = dom.SubsystemControl(X, tp ? &phase : nullptr);
      const OutputBundle outs = dom.SubsystemOutputs(tp ? &p : nullptr);
      rs.ys.resize(outs.size());
      for (size_t i = 0; i < outs.size(); ++i) {
        rs.ys(i) = outs[i].value(xs);
        if (outs[i].relative_degree == 2) {
          rd.max_output_error = std::max(rd.max_output_error, std::abs(rs.ys(i)));
        }
      }
      rd.max_state_error =
          std::max(rd.max_state_error, (rs.xs_sub - rs.xs_full).lpNorm<Eigen::Infinity>());
      ++rd.samples;
      result.samples.push_back(std::move(rs));
      if (p.tau >= 1.0) {
        rd.reached_tau_end = true;
        stopped = true;
      }
    };

    Vec x0(xs_full[0].data(), xs_full[0].data() + 4);
    odeint::integrate_times(
        odeint::make_controlled(atol, rtol, odeint::runge_kutta_dopri5<Vec>()), rhs, x0,
        t.begin(), t.end(), std::min(1e-4, t[1] - t[0]), observe);

    result.max_state_error = std::max(result.max_state_error, rd.max_state_error);
    result.max_output_error = std::max(result.max_output_error, rd.max_output_error);
    spdlog::debug("replay step {} ({}): {} samples, |dx_s| {:.3e}, |y_s| {:.3e}", d.step,
                  VertexName(v), rd.samples, rd.max_state_error, rd.max_output_error);
    result.domains.push_back(rd);
  }
  return result;
}

void WriteReplayCsv(const ReplayResult& replay, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot write " + path);
  f << "t,domain,step,pk_full,pa_full,pk_dot_full,pa_dot_full,pk_sub,pa_sub,"
       "pk_dot_sub,pa_dot_sub,err_pk,err_pa,err_pk_dot,err_pa_dot,us0,us1,ys0,ys1\n";
  for (const ReplaySample& s : replay.samples) {
    std::string line = FormatDouble(s.t) + "," + VertexName(s.vertex) + "," +
                       std::to_string(s.step);
    auto add = [&line](const VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) line += "," + FormatDouble(v(i));
    };
    add(s.xs_full);
    add(s.xs_sub);
    add((s.xs_sub - s.xs_full).cwiseAbs());
    add(s.us);
    add(s.ys);
    f << line << '\n';
  }
}

}  // namespace sepsim
