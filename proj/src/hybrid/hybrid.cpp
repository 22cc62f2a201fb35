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
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <spdlog/spdlog.h>

#include "sepsim/hybrid.hpp"

namespace sepsim {
namespace {

namespace odeint = boost::numeric::odeint;
using OdeState = std::vector<double>;

OdeState Pack(const State& x) {
  OdeState s(x.q.size() + x.v.size());
  Eigen::Map<VectorXd>(s.data(), x.q.size()) = x.q;
  Eigen::Map<VectorXd>(s.data() + x.q.size(), x.v.size()) = x.v;
  return s;
}

State Unpack(const OdeState& s, int n) {
  State x;
  x.q = Eigen::Map<const VectorXd>(s.data(), n);
  x.v = Eigen::Map<const VectorXd>(s.data() + n, n);
  return x;
}

bool AllFinite(const OdeState& s) {
  return std::all_of(s.begin(), s.end(), [](double d) { return std::isfinite(d); });
}

TraceSample MakeSample(const DomainSpec& d, const State& x, double t, int step) {
  const ClosedLoopEval e = d.closed_loop(x);
  TraceSample s;
  s.t = t;
  s.vertex = d.vertex;
  s.step = step;
  s.q = x.q;
  s.v = x.v;
  s.u = e.u;
  s.coupling = e.coupling;
  s.phase = e.phase;
  s.outputs = e.outputs;
  return s;
}

bool Armed(const DomainSpec& d, const State& x) {
  return !d.armed || d.armed(x);
}

// Rate of the guard along the flow, by central difference in q along v.
double GuardRate(const DomainSpec& d, const State& x) {
  const double h = 1e-7;
  State a = x, b = x;
  a.q += h * x.v;
  b.q -= h * x.v;
  return (d.guard(a) - d.guard(b)) / (2.0 * h);
}

}  // namespace

DomainResult IntegrateDomain(const RobotModel& model, const DomainSpec& domain,
                             const State& x0, double t0, double t_max,
                             int step, const IntegratorOptions& opt,
                             Trace& trace) {
  const int n = model.dof();
  if (x0.q.size() != n || x0.v.size() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "initial state size");
  }
  if (!(t_max > t0)) {
    throw Error(ErrorKind::kPrecondition, "t_max must exceed t0");
  }
  if (!domain.closed_loop || !domain.guard) {
    throw Error(ErrorKind::kPrecondition, "domain needs closed_loop and guard");
  }
  if (!domain.constraints.empty()) {
    const double r =
        ConstraintResidual(model, domain.constraints, x0.q).lpNorm<Eigen::Infinity>();
    if (r > 1e-8) {
      throw Error(ErrorKind::kPrecondition,
                  "initial state off the constraint manifold: " + std::to_string(r));
    }
  }

  DomainRecord rec;
  rec.step = step;
  rec.vertex = domain.vertex;
  rec.t_start = t0;
  rec.first_sample = static_cast<int>(trace.samples.size());

  DomainResult res;
  double g_prev = domain.guard(x0);
  if (Armed(domain, x0) && g_prev <= 0.0 && GuardRate(domain, x0) < 0.0) {
    res.guard_hit = true;
    res.t_end = t0;
    res.end = x0;
    res.guard_value = g_prev;
    rec.t_end = t0;
    rec.guard_hit = true;
    rec.end_sample = rec.first_sample;
    trace.domains.push_back(rec);
    return res;
  }

  trace.samples.push_back(MakeSample(domain, x0, t0, step));

  auto rhs = [&](const OdeState& s, OdeState& ds, double) {
    const State x = Unpack(s, n);
    const ClosedLoopEval e = domain.closed_loop(x);
    ds.resize(2 * n);
    Eigen::Map<VectorXd>(ds.data(), n) = x.v;
    Eigen::Map<VectorXd>(ds.data() + n, n) = e.qdd;
  };

  auto stepper = odeint::make_dense_output(
      opt.atol, opt.rtol, opt.max_step, odeint::runge_kutta_dopri5<OdeState>());
  stepper.initialize(Pack(x0), t0, std::min(1e-4, opt.max_step));

  const double dt_out = opt.output_dt;
  double next_out = (std::floor(t0 / dt_out + 1e-9) + 1.0) * dt_out;
  OdeState buf(2 * n);

  auto emit_until = [&](double t_limit, bool inclusive) {
    while (next_out < t_limit || (inclusive && next_out <= t_limit)) {
      stepper.calc_state(next_out, buf);
      trace.samples.push_back(MakeSample(domain, Unpack(buf, n), next_out, step));
      next_out += dt_out;
      // Re-anchor to the grid to avoid drift from repeated addition.
      next_out = std::round(next_out / dt_out) * dt_out;
    }
  };

  while (true) {
    const auto [t_prev, t_new] = stepper.do_step(rhs);
    const OdeState& s_new = stepper.current_state();
    if (!AllFinite(s_new)) {
      throw Error(ErrorKind::kNonFinite, "state became non-finite at t = " +
                                             std::to_string(t_new));
    }
    State x_new = Unpack(s_new, n);
    const double g_new = domain.guard(x_new);

    if (g_prev > 0.0 && g_new <= 0.0 && Armed(domain, x_new)) {
      double lo = t_prev, hi = t_new, t_hit = t_new, g_hit = g_new;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, buf);
        const double gm = domain.guard(Unpack(buf, n));
        t_hit = mid;
        g_hit = gm;
        if (std::abs(gm) <= opt.guard_tol || hi - lo < 1e-15) break;
        (gm > 0.0 ? lo : hi) = mid;
      }
      if (std::abs(g_hit) > opt.guard_tol) {
        t_hit = hi;
        stepper.calc_state(hi, buf);
        g_hit = domain.guard(Unpack(buf, n));
      }
      emit_until(t_hit, false);
      stepper.calc_state(t_hit, buf);
      res.end = Unpack(buf, n);
      res.t_end = t_hit;
      res.guard_hit = true;
      res.guard_value = g_hit;
      trace.samples.push_back(MakeSample(domain, res.end, t_hit, step));
      break;
    }

    if (t_new >= t_max) {
      emit_until(t_max, false);
      stepper.calc_state(t_max, buf);
      res.end = Unpack(buf, n);
      res.t_end = t_max;
      res.guard_value = domain.guard(res.end);
      trace.samples.push_back(MakeSample(domain, res.end, t_max, step));
      break;
    }

    emit_until(t_new, true);
    if (domain.monitor) domain.monitor(x_new);

    if (!domain.constraints.empty()) {
      const double r = ConstraintResidual(model, domain.constraints, x_new.q)
                           .lpNorm<Eigen::Infinity>();
      const double rv = EvaluateConstraints(model, domain.constraints, x_new.q,
                                            x_new.v, false)
                            .jacobian.operator*(x_new.v)
                            .lpNorm<Eigen::Infinity>();
      rec.max_constraint_residual = std::max(rec.max_constraint_residual, r);
      if (r > opt.projection_tol || rv > opt.projection_tol) {
        ProjectOntoConstraints(model, domain.constraints, x_new,
                               opt.projection_tol * 0.1);
        spdlog::trace("projected at t = {:.6f} (residual {:.3e})", t_new, r);
        stepper.initialize(Pack(x_new), t_new, stepper.current_time_step());
      }
    }
    g_prev = domain.guard(x_new);
  }

  rec.t_end = res.t_end;
  rec.guard_hit = res.guard_hit;
  rec.end_sample = static_cast<int>(trace.samples.size());
  trace.domains.push_back(rec);
  return res;
}

ImpactResult ImpactMap(const RobotModel& model,
                       const ConstraintSet& post, const VectorXd& q,
                       const VectorXd& v_minus) {
  const int n = model.dof();
  if (q.size() != n || v_minus.size() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "impact state size");
  }
  const MatrixXd D = MassMatrix(model, q);
  const MatrixXd J =
      EvaluateConstraints(model, post, q, VectorXd::Zero(n)).jacobian;
  const int m = static_cast<int>(J.rows());
  MatrixXd K = MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = D;
  K.topRightCorner(n, m) = -J.transpose();
  K.bottomLeftCorner(m, n) = J;
  VectorXd rhs = VectorXd::Zero(n + m);
  rhs.head(n) = D * v_minus;
  const VectorXd sol = K.fullPivLu().solve(rhs);
  if (!sol.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "impact map produced non-finite values");
  }
  return {sol.head(n), sol.tail(m)};
}

Trace StepCycle(const RobotModel& model, const HybridSpec& spec, Vertex start,
                const State& x0, int n_steps, const IntegratorOptions& opt) {
  if (n_steps < 0) throw Error(ErrorKind::kPrecondition, "n_steps must be >= 0");
  if (!spec.enter || !spec.post_impact_constraints) {
    throw Error(ErrorKind::kPrecondition, "hybrid spec is incomplete");
  }
  Trace trace;
  Vertex vertex = start;
  State x = x0;
  double t = 0.0;
  if (n_steps == 0) {
    const DomainSpec d = spec.enter(vertex, x, 0);
    trace.samples.push_back(MakeSample(d, x, t, 0));
    trace.final_state = x;
    trace.final_vertex = vertex;
    return trace;
  }
  for (int step = 0; step < n_steps; ++step) {
    const DomainSpec d = spec.enter(vertex, x, step);
    const DomainResult r = IntegrateDomain(model, d, x, t, t + spec.domain_timeout,
                                           step, opt, trace);
    if (!r.guard_hit) {
      throw Error(ErrorKind::kTimeout,
                  std::string("guard not reached in domain ") + VertexName(vertex) +
                      " of step " + std::to_string(step));
    }
    t = r.t_end;
    const ConstraintSet post = spec.post_impact_constraints(vertex, r.end);
    const ImpactResult imp = ImpactMap(model, post, r.end.q, r.end.v);

    ImpactEvent ev;
    ev.step = step;
    ev.t = t;
    ev.from = vertex;
    ev.to = NextVertex(vertex);
    ev.guard = r.guard_value;
    ev.kinetic_before = ComputeEnergy(model, r.end.q, r.end.v).kinetic;
    ev.kinetic_after = ComputeEnergy(model, r.end.q, imp.v_plus).kinetic;
    ev.post_velocity_residual =
        (EvaluateConstraints(model, post, r.end.q, imp.v_plus, false).jacobian *
         imp.v_plus)
            .lpNorm<Eigen::Infinity>();
    ev.impulse = imp.impulse;
    trace.impacts.push_back(ev);
    spdlog::debug("step {} ({}) ends at t = {:.6f}", step, VertexName(vertex), t);

    x = State{r.end.q, imp.v_plus};
    vertex = NextVertex(vertex);
  }
  trace.final_state = x;
  trace.final_vertex = vertex;
  return trace;
}

}  // namespace sepsim
