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

#include "sepsim/sepctrl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

namespace sepsim {
namespace {

constexpr double kSingularRatio = 1e-12;

double InfNorm(const MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void CheckFinite(const VectorXd& v, const std::string& what) {
  if (!v.allFinite()) throw Error(ErrorKind::kNonFinite, what);
}

VectorXd OutputGradient(const Output& o, const VectorXd& x) {
  if (o.gradient) return o.gradient(x);
  return NumericalGradient(o.value, x, FirstOrderStep(x));
}

// Relative-degree-2 outputs must not see the input through dy/dx.
void CheckRelativeDegree(const OutputBundle& outputs, const VectorXd& x,
                         const MatrixXd& g) {
  for (const Output& o : outputs) {
    if (o.relative_degree == 1) continue;
    const VectorXd grad = OutputGradient(o, x);
    const double lg = InfNorm(grad.transpose() * g);
    const double scale = 1.0 + grad.lpNorm<1>() * InfNorm(g);
    if (lg > 1e-8 * scale) {
      throw Error(ErrorKind::kRelativeDegree,
                  o.name + ": L_g y = " + std::to_string(lg) +
                      " for declared relative degree 2");
    }
  }
}

void CheckDeclared(const OutputBundle& outputs) {
  for (const Output& o : outputs) {
    if (o.relative_degree != 1 && o.relative_degree != 2) {
      throw Error(ErrorKind::kRelativeDegree,
                  o.name + ": relative degree must be 1 or 2");
    }
  }
}

}  // namespace

double FirstOrderStep(const VectorXd& x) { return 1e-6 * (1.0 + x.norm()); }
double SecondOrderStep(const VectorXd& x) { return 1e-4 * (1.0 + x.norm()); }

double DirectionalDerivative(const std::function<double(const VectorXd&)>& y,
                             const VectorXd& direction, const VectorXd& x,
                             double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::kPrecondition, "step must be positive");
  const double d = (y(x + h * direction) - y(x - h * direction)) / (2.0 * h);
  if (!std::isfinite(d)) {
    throw Error(ErrorKind::kNonFinite, "directional derivative");
  }
  return d;
}

VectorXd NumericalGradient(const std::function<double(const VectorXd&)>& y,
                           const VectorXd& x, double h) {
  VectorXd grad(x.size());
  for (int i = 0; i < x.size(); ++i) {
    grad(i) = DirectionalDerivative(y, VectorXd::Unit(x.size(), i), x, h);
  }
  return grad;
}

IoDynamics AssembleIoDynamics(const VectorXd& f, const MatrixXd& g,
                              const std::vector<VectorXd>& lie_gradients) {
  const int k = static_cast<int>(lie_gradients.size());
  IoDynamics io;
  io.decoupling.resize(k, g.cols());
  io.lf.resize(k);
  for (int i = 0; i < k; ++i) {
    if (lie_gradients[i].size() != f.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "Lie gradient size");
    }
    io.decoupling.row(i) = lie_gradients[i].transpose() * g;
    io.lf(i) = lie_gradients[i].dot(f);
  }
  return io;
}

std::vector<VectorXd> LieGradients(
    const OutputBundle& outputs,
    const std::function<VectorXd(const VectorXd&)>& drift, const VectorXd& x) {
  std::vector<VectorXd> out;
  out.reserve(outputs.size());
  for (const Output& o : outputs) {
    if (o.lie_gradient) {
      out.push_back(o.lie_gradient(x));
    } else if (o.relative_degree == 1) {
      out.push_back(OutputGradient(o, x));
    } else {
      if (!drift) {
        throw Error(ErrorKind::kPrecondition,
                    o.name + ": no analytic Lie gradient and no drift field");
      }
      const double h1 = FirstOrderStep(x);
      auto lf_y = [&](const VectorXd& z) {
        return DirectionalDerivative(o.value, drift(z), z, h1);
      };
      out.push_back(NumericalGradient(lf_y, x, SecondOrderStep(x)));
    }
    CheckFinite(out.back(), o.name + ": Lie gradient");
  }
  return out;
}

IoDynamics ComputeIoDynamics(const AffineSystem& system,
                             const OutputBundle& outputs, const VectorXd& x,
                             const IoOptions& options) {
  if (x.size() != system.n) {
    throw Error(ErrorKind::kDimensionMismatch, "state size");
  }
  if (static_cast<int>(outputs.size()) != system.m) {
    throw Error(ErrorKind::kDimensionMismatch,
                "number of outputs must equal number of inputs");
  }
  CheckDeclared(outputs);
  const VectorXd f = system.drift(x);
  const MatrixXd g = system.control(x);
  CheckFinite(f, "drift");
  if (options.check_relative_degree) CheckRelativeDegree(outputs, x, g);
  return AssembleIoDynamics(f, g, LieGradients(outputs, system.drift, x));
}

VectorXd SolveDecoupled(const IoDynamics& io, const VectorXd& mu,
                        const VectorXd& feedforward) {
  const int m = static_cast<int>(io.lf.size());
  if (mu.size() != m || io.decoupling.rows() != m ||
      io.decoupling.cols() != m) {
    throw Error(ErrorKind::kDimensionMismatch, "decoupling system size");
  }
  VectorXd rhs = io.lf - mu;
  if (feedforward.size() > 0) {
    if (feedforward.size() != m) {
      throw Error(ErrorKind::kDimensionMismatch, "feedforward size");
    }
    rhs -= feedforward;
  }
  Eigen::JacobiSVD<MatrixXd> svd(io.decoupling);
  const auto& s = svd.singularValues();
  const double smax = s(0), smin = s(m - 1);
  if (!(smax > 0.0) || smin <= kSingularRatio * smax) {
    throw Error(ErrorKind::kSingularDecoupling,
                "cond(A) = " + std::to_string(smin > 0 ? smax / smin : INFINITY));
  }
  spdlog::trace("cond(A) = {:.3e}", smax / smin);
  const VectorXd u = -io.decoupling.partialPivLu().solve(rhs);
  CheckFinite(u, "control");
  return u;
}

VectorXd FeedbackLinearize(const AffineSystem& system,
                           const OutputBundle& outputs, const VectorXd& mu,
                           const VectorXd& x, const IoOptions& options) {
  return SolveDecoupled(ComputeIoDynamics(system, outputs, x, options), mu);
}

VectorXd TimeVaryingControl(const AffineSystem& system,
                            const OutputBundle& outputs, const VectorXd& mu,
                            const VectorXd& x, const TimePhase& phase,
                            const DesiredDerivativeSupplier& desired,
                            const IoOptions& options) {
  return SolveDecoupled(ComputeIoDynamics(system, outputs, x, options), mu,
                        desired(x, phase));
}

IoDynamics SubsystemIoDynamics(const SubsystemView& view,
                               const OutputBundle& outputs,
                               const VectorXd& point,
                               const IoOptions& options) {
  if (static_cast<int>(outputs.size()) != view.m_s) {
    throw Error(ErrorKind::kDimensionMismatch,
                "number of s-outputs must equal number of s-inputs");
  }
  CheckDeclared(outputs);
  const VectorXd local = view.local_state(point);
  if (local.size() != view.n_s) {
    throw Error(ErrorKind::kDimensionMismatch, "subsystem state size");
  }
  const VectorXd f = view.drift(point);
  const MatrixXd g = view.control(point);
  CheckFinite(f, "subsystem drift");
  if (options.check_relative_degree) CheckRelativeDegree(outputs, local, g);
  // The subsystem drift depends on the whole point, not only on the local
  // state, so nested differences are unavailable here.
  return AssembleIoDynamics(f, g, LieGradients(outputs, nullptr, local));
}

VectorXd SubsystemControlLaw(const SubsystemView& view,
                             const OutputBundle& outputs, const VectorXd& mu_s,
                             const VectorXd& point,
                             const VectorXd& feedforward,
                             const IoOptions& options) {
  return SolveDecoupled(SubsystemIoDynamics(view, outputs, point, options),
                        mu_s, feedforward);
}

void SeparableStructure::Validate(int n, int m) const {
  if (static_cast<int>(xr.size() + xs.size()) != n ||
      static_cast<int>(ur.size() + us.size()) != m) {
    throw Error(ErrorKind::kDimensionMismatch, "partition does not cover");
  }
  std::vector<int> all = xr;
  all.insert(all.end(), xs.begin(), xs.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < n; ++i) {
    if (all[i] != i) {
      throw Error(ErrorKind::kPrecondition, "state partition is not a partition");
    }
  }
  std::vector<int> inputs = ur;
  inputs.insert(inputs.end(), us.begin(), us.end());
  std::sort(inputs.begin(), inputs.end());
  for (int i = 0; i < m; ++i) {
    if (inputs[i] != i) {
      throw Error(ErrorKind::kPrecondition, "input partition is not a partition");
    }
  }
}

namespace {

CheckReport Vacuous(const std::string& name, double threshold) {
  CheckReport r;
  r.name = name;
  r.threshold = threshold;
  r.note = "no samples; vacuous pass";
  spdlog::warn("{}: no samples, vacuous pass", name);
  return r;
}

void Accumulate(CheckReport& r, double raw, double scale) {
  r.residual = std::max(r.residual, raw / (1.0 + scale));
  r.passed = r.residual <= r.threshold;
}

}  // namespace

CheckReport CheckSeparability(const AffineSystem& system,
                              const SeparableStructure& structure,
                              const std::vector<VectorXd>& samples,
                              double tolerance) {
  structure.Validate(system.n, system.m);
  if (samples.empty()) return Vacuous("separability", tolerance);
  CheckReport r;
  r.name = "separability";
  r.threshold = tolerance;
  for (const VectorXd& x : samples) {
    const MatrixXd g = system.control(x);
    double block = 0.0;
    for (int i : structure.xs) {
      for (int j : structure.ur) block = std::max(block, std::abs(g(i, j)));
    }
    Accumulate(r, block, InfNorm(g));
    ++r.samples;
  }
  return r;
}

OutputConditionReport CheckOutputConditions(
    const AffineSystem& system, const SeparableStructure& structure,
    const OutputBundle& s_outputs,
    const std::function<VectorXd(const VectorXd&)>& subsystem_drift,
    const std::vector<VectorXd>& samples, double tolerance) {
  structure.Validate(system.n, system.m);
  OutputConditionReport rep;
  rep.locality = {"output locality", true, 0.0, tolerance, 0, ""};
  rep.drift_terms = {"drift cross terms", true, 0.0, tolerance, 0, ""};
  rep.input_terms = {"input cross terms", true, 0.0, tolerance, 0, ""};
  if (samples.empty()) {
    rep.locality = Vacuous("output locality", tolerance);
    rep.drift_terms = Vacuous("drift cross terms", tolerance);
    rep.input_terms = Vacuous("input cross terms", tolerance);
    return rep;
  }
  auto restrict_r = [&](const VectorXd& full) {
    VectorXd out = VectorXd::Zero(full.size());
    for (int i : structure.xr) out(i) = full(i);
    return out;
  };
  for (const VectorXd& x : samples) {
    const VectorXd f = system.drift(x);
    const MatrixXd g = system.control(x);
    const double scale = std::max(InfNorm(f), InfNorm(g));
    const double h1 = FirstOrderStep(x);
    const double h2 = SecondOrderStep(x);
    for (const Output& o : s_outputs) {
      // Iterated Lie derivatives along the subsystem drift; j = 0 is y.
      std::vector<std::function<double(const VectorXd&)>> lie;
      lie.push_back(o.value);
      if (o.relative_degree == 2) {
        lie.push_back([&o, &subsystem_drift, h1](const VectorXd& z) {
          const VectorXd fs = subsystem_drift(z);
          if (o.gradient) return o.gradient(z).dot(fs);
          return DirectionalDerivative(o.value, fs, z, h1);
        });
      }
      double local = 0.0;
      for (int i : structure.xr) {
        local = std::max(local, std::abs(DirectionalDerivative(
                                    o.value, VectorXd::Unit(x.size(), i), x, h1)));
      }
      Accumulate(rep.locality, local, 0.0);

      const VectorXd fr = restrict_r(f);
      for (int j = 1; j < o.relative_degree; ++j) {
        const double hj = o.gradient ? h1 : h2;
        const double d = DirectionalDerivative(lie[j], fr, x, hj);
        Accumulate(rep.drift_terms, std::abs(d), scale);
      }
      const auto& top = lie[o.relative_degree - 1];
      const double ht = (o.relative_degree == 2 && !o.gradient) ? h2 : h1;
      for (int c = 0; c < g.cols(); ++c) {
        const double d = DirectionalDerivative(top, restrict_r(g.col(c)), x, ht);
        Accumulate(rep.input_terms, std::abs(d), scale);
      }
    }
    ++rep.locality.samples;
    ++rep.drift_terms.samples;
    ++rep.input_terms.samples;
  }
  return rep;
}

CheckReport CheckSubsystemEquivalence(
    const SubsystemView& full, const SubsystemView& reduced,
    const std::function<VectorXd(const VectorXd&)>& transform,
    const std::vector<VectorXd>& samples, double tolerance) {
  if (samples.empty()) return Vacuous("subsystem equivalence", tolerance);
  CheckReport r;
  r.name = "subsystem equivalence";
  r.threshold = tolerance;
  for (const VectorXd& x : samples) {
    const VectorXd big = transform(x);
    const VectorXd f = full.drift(x), fb = reduced.drift(big);
    const MatrixXd g = full.control(x), gb = reduced.control(big);
    if (f.size() != fb.size() || g.rows() != gb.rows() || g.cols() != gb.cols()) {
      throw Error(ErrorKind::kDimensionMismatch, "subsystem views differ in size");
    }
    const double raw = std::max(InfNorm(f - fb), InfNorm(g - gb));
    Accumulate(r, raw, std::max(InfNorm(f), InfNorm(g)));
    ++r.samples;
  }
  return r;
}

}  // namespace sepsim
