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
#include <vector>

#include <spdlog/spdlog.h>

#include "sepsim/prosthesis.hpp"

namespace sepsim {
namespace {

using L = FullModelLayout;
constexpr int kN = L::kEta;

double Inf(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

CheckReport Report(const char* name, double tol, int n) {
  CheckReport r;
  r.name = name;
  r.threshold = tol;
  r.samples = n;
  return r;
}

void Finish(CheckReport& r) {
  r.passed = r.residual <= r.threshold;
  if (r.samples == 0) r.note = "no samples; vacuous pass";
}

}  // namespace

DomainSamples SampleDomain(const AmputeeSystem& sys, Vertex v, int n, std::mt19937& rng) {
  DomainSamples out;
  for (int i = 0; i < n; ++i) {
    const AdmissibleSample s = SampleAdmissible(sys, v, rng);
    if (i == 0) out.ground = s.ground;
    State x = s.x;
    x.q(L::kX) += out.ground.x - s.ground.x;
    x.q(L::kZ) += out.ground.z - s.ground.z;
    out.states.push_back(x);
  }
  return out;
}

std::vector<DomainVerification> Verify(const AmputeeSystem& sys, const GaitParams& gait,
                                       const VerifyOptions& opt) {
  if (opt.samples < 0) throw Error(ErrorKind::kConfig, "sample count must be >= 0");
  if (opt.samples == 0) spdlog::warn("verify: no samples requested, checks pass vacuously");
  std::mt19937 rng(opt.seed);
  std::vector<DomainVerification> result;
  for (Vertex v : {Vertex::kPt, Vertex::kPw}) {
    const DomainSamples ds = SampleDomain(sys, v, opt.samples, rng);
    const AmputeeDomain d(sys, v, gait.at(v), gait.gains, ds.ground);
    const bool tp = IsTimePhase(v);
    std::vector<VectorXd> xs;
    for (const State& s : ds.states) xs.push_back(Stack(s));

    // The applied input and phase at each sample, evaluated once.
    std::vector<FullControl> controls;
    for (const State& s : ds.states) controls.push_back(d.Control(s));
    // Checkers also evaluate at perturbed points; those get a fresh solve.
    const auto applied = [&](const VectorXd& x) -> VectorXd {
      for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] == x) return controls[i].u;
      }
      return d.Control(Split(x, kN)).u;
    };

    DomainVerification dv;
    dv.vertex = v;
    const SeparableStructure structure = sys.Structure();
    dv.separability = CheckSeparability(d.SeparableSystem(applied), structure, xs,
                                        opt.separability_tol);

    const auto applied_us = [&](const VectorXd& X) -> VectorXd {
      return tp ? VectorXd::Zero(2) : d.SubsystemControl(X, nullptr);
    };
    const auto transform = [&](const VectorXd& x) {
      return MeasurementTransform(sys, d.constraints(), Split(x, kN), applied(x));
    };
    dv.equivalence = CheckSubsystemEquivalence(d.FullSubsystemView(applied),
                                               d.AugmentedSeparableView(applied_us),
                                               transform, xs, opt.equivalence_tol);

    // Time-phase outputs are checked at each sample's own phase.
    OutputConditionReport oc;
    oc.locality = Report("output locality", opt.output_tol, 0);
    oc.drift_terms = Report("drift cross terms", opt.output_tol, 0);
    oc.input_terms = Report("input cross terms", opt.output_tol, 0);
    for (size_t i = 0; i < xs.size(); ++i) {
      const TimePhase& p = controls[i].phase;
      const OutputConditionReport r = CheckOutputConditions(
          d.SeparableSystem(applied), structure, d.FullSubsystemOutputs(tp ? &p : nullptr),
          d.EmbeddedSubsystemDrift(applied), {xs[i]}, opt.output_tol);
      for (auto [dst, src] : {std::pair{&oc.locality, &r.locality},
                              std::pair{&oc.drift_terms, &r.drift_terms},
                              std::pair{&oc.input_terms, &r.input_terms}}) {
        dst->residual = std::max(dst->residual, src->residual);
        dst->samples += src->samples;
        if (dst->name.empty()) dst->name = src->name;
      }
    }
    for (CheckReport* r : {&oc.locality, &oc.drift_terms, &oc.input_terms}) Finish(*r);
    dv.outputs = oc;

    dv.ssc_law = Report("u_s(x) = u_ssc(x)", opt.law_tol, opt.samples);
    dv.measured_law = Report("u_s(x) = ubar_s(T(x))", opt.law_tol, opt.samples);
    for (size_t i = 0; i < xs.size(); ++i) {
      const FullControl& c = controls[i];
      const VectorXd us = c.u.tail(2);
      const VectorXd ssc = d.SscControl(ds.states[i], c.u, c.phase);
      dv.ssc_law.residual =
          std::max(dv.ssc_law.residual, Inf(us - ssc) / (1.0 + Inf(c.u)));
      const VectorXd X = MeasurementTransform(sys, d.constraints(), ds.states[i], c.u);
      const VectorXd ubar = d.SubsystemControl(X, tp ? &c.phase : nullptr);
      dv.measured_law.residual = std::max(dv.measured_law.residual, Inf(us - ubar));
    }
    Finish(dv.ssc_law);
    Finish(dv.measured_law);
    spdlog::info("verify {}: separability {:.2e}, equivalence {:.2e}, outputs {:.2e}/{:.2e}/{:.2e}, "
                 "ssc {:.2e}, measured {:.2e}",
                 VertexName(v), dv.separability.residual, dv.equivalence.residual,
                 oc.locality.residual, oc.drift_terms.residual, oc.input_terms.residual,
                 dv.ssc_law.residual, dv.measured_law.residual);
    result.push_back(dv);
  }
  return result;
}

}  // namespace sepsim
