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

// Hybrid execution: event-located integration of one domain, plastic
// impacts, and the directed pt -> pw -> pt cycle.

#ifndef SEPSIM_HYBRID_HPP_
#define SEPSIM_HYBRID_HPP_

#include <functional>
#include <string>
#include <vector>

#include "sepsim/gait.hpp"
#include "sepsim/multibody.hpp"
#include "sepsim/sepctrl.hpp"

namespace sepsim {

// Everything the closed loop reports at one state.
struct ClosedLoopEval {
  VectorXd qdd;
  VectorXd u;
  VectorXd coupling;  // socket wrench, or empty
  TimePhase phase;
  VectorXd outputs;
};

struct DomainSpec {
  Vertex vertex = Vertex::kPt;
  ConstraintSet constraints;
  std::function<ClosedLoopEval(const State&)> closed_loop;
  // Zero crossing from positive to non-positive ends the domain.
  std::function<double(const State&)> guard;
  // Optional; crossings are ignored while this returns false.
  std::function<bool(const State&)> armed;
  // Optional; throws (e.g. kFall) to abort.
  std::function<void(const State&)> monitor;
};

struct IntegratorOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = 5e-3;
  double output_dt = 1e-3;    // trace sampling period
  double guard_tol = 1e-10;   // |guard| at the located event
  double projection_tol = 1e-10;
};

struct TraceSample {
  double t = 0.0;
  Vertex vertex = Vertex::kPt;
  int step = 0;
  VectorXd q, v, u, coupling;
  TimePhase phase;
  VectorXd outputs;
};

struct ImpactEvent {
  int step = 0;  // index of the domain that ended
  double t = 0.0;
  Vertex from = Vertex::kPt;
  Vertex to = Vertex::kPw;
  double guard = 0.0;
  double kinetic_before = 0.0;
  double kinetic_after = 0.0;
  double post_velocity_residual = 0.0;  // |J+ v+|_inf
  VectorXd impulse;
};

struct DomainRecord {
  int step = 0;
  Vertex vertex = Vertex::kPt;
  double t_start = 0.0;
  double t_end = 0.0;
  bool guard_hit = false;
  double max_constraint_residual = 0.0;
  int first_sample = 0;  // index range into Trace::samples
  int end_sample = 0;
};

struct Trace {
  std::vector<TraceSample> samples;
  std::vector<ImpactEvent> impacts;
  std::vector<DomainRecord> domains;
  // State and vertex after the last reset (set by StepCycle only).
  State final_state;
  Vertex final_vertex = Vertex::kPt;
};

struct DomainResult {
  bool guard_hit = false;
  double t_end = 0.0;
  State end;
  double guard_value = 0.0;
};

// Integrates one domain from x0 at t0 until the guard fires or t_max passes.
// Samples are appended to `trace` on the output grid plus the start and end
// instants; the domain record is appended as well. Precondition: x0 on the
// constraint manifold within 1e-8.
DomainResult IntegrateDomain(const RobotModel& model, const DomainSpec& domain,
                             const State& x0, double t0, double t_max,
                             int step, const IntegratorOptions& options,
                             Trace& trace);

struct ImpactResult {
  VectorXd v_plus;
  VectorXd impulse;
};

// Plastic impact: [D -J^T; J 0][v+; L] = [D v-; 0].
ImpactResult ImpactMap(const RobotModel& model,
                       const ConstraintSet& post_constraints,
                       const VectorXd& q, const VectorXd& v_minus);

struct HybridSpec {
  // Builds the domain entered with `entry` (already post-impact).
  std::function<DomainSpec(Vertex, const State& entry, int step)> enter;
  // Constraints active right after the impact that ends `from`.
  std::function<ConstraintSet(Vertex from, const State& pre_impact)>
      post_impact_constraints;
  double domain_timeout = 5.0;  // s per domain
};

// Alternates domains and impacts along pt -> pw -> pt ... for n_steps
// domains. Throws kTimeout if a guard is never reached.
Trace StepCycle(const RobotModel& model, const HybridSpec& spec, Vertex start,
                const State& x0, int n_steps, const IntegratorOptions& options);

// ---------------------------------------------------------------------------
// CSV export. One row per sample: t, domain, step, q..., v..., u...,
// coupling..., tau, tau_dot, tau_ddot, y...

void WriteTraceCsv(const Trace& trace, const std::string& path);
void WriteImpactsCsv(const Trace& trace, const std::string& path);
// Reads samples back; domain records are rebuilt from the domain/step
// columns. Throws kSchema on malformed input.
Trace ReadTraceCsv(const std::string& path);

std::string FormatDouble(double x);

}  // namespace sepsim

#endif  // SEPSIM_HYBRID_HPP_
