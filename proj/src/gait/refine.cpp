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
#include <random>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <spdlog/spdlog.h>

#include "sepsim/gait.hpp"

namespace sepsim {
namespace {

constexpr int kFreePerVertex = kNumDegreeTwo * (kNumCoeffs - 2) + 1;
constexpr double kFailureCost = 1e3;

std::vector<double> Pack(const GaitParams& g) {
  std::vector<double> x;
  for (Vertex v : {Vertex::kPt, Vertex::kPw}) {
    const VertexGait& vg = g.at(v);
    for (int i = 0; i < kNumDegreeTwo; ++i) {
      for (int k = 2; k < kNumCoeffs; ++k) x.push_back(vg.alpha(i, k));
    }
    x.push_back(vg.v_hip);
  }
  return x;
}

GaitParams Unpack(const GaitParams& base, const gsl_vector* x) {
  GaitParams g = base;
  int j = 0;
  for (Vertex v : {Vertex::kPt, Vertex::kPw}) {
    VertexGait& vg = g.at(v);
    for (int i = 0; i < kNumDegreeTwo; ++i) {
      for (int k = 2; k < kNumCoeffs; ++k) vg.alpha(i, k) = gsl_vector_get(x, j++);
    }
    vg.v_hip = gsl_vector_get(x, j++);
  }
  return g;
}

struct Context {
  const GaitParams* base;
  const std::function<double(const GaitParams&)>* residual;
  GaitParams best;
  double best_cost;
  int evaluations;
  int budget;
};

double Cost(const gsl_vector* x, void* p) {
  auto* ctx = static_cast<Context*>(p);
  if (ctx->evaluations >= ctx->budget) return ctx->best_cost + kFailureCost;
  ++ctx->evaluations;
  const GaitParams g = Unpack(*ctx->base, x);
  double c = kFailureCost;
  try {
    c = (*ctx->residual)(g);
    if (!std::isfinite(c)) c = kFailureCost;
  } catch (const Error& e) {
    spdlog::debug("refine: candidate failed: {}", e.what());
  }
  if (c < ctx->best_cost) {
    ctx->best_cost = c;
    ctx->best = g;
    spdlog::info("refine: eval {} residual {:.6e}", ctx->evaluations, c);
  }
  return c;
}

}  // namespace

RefineResult RefineGait(const GaitParams& gait0,
                        const std::function<double(const GaitParams&)>& residual,
                        int budget, std::uint32_t seed) {
  RefineResult out;
  out.gait = gait0;
  if (budget <= 0) return out;
  out.initial_residual = residual(gait0);
  out.residual = out.initial_residual;
  out.evaluations = 1;
  if (budget == 1) return out;

  const std::vector<double> x0 = Pack(gait0);
  const int n = static_cast<int>(x0.size());
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  for (int i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0[i]);
    const bool is_speed = (i + 1) % kFreePerVertex == 0;
    gsl_vector_set(step, i, (is_speed ? 0.01 : 0.02) * jitter(rng));
  }

  Context ctx{&gait0, &residual, gait0, out.initial_residual, 1, budget};
  gsl_multimin_function fn{&Cost, static_cast<size_t>(n), &ctx};
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_set_error_handler_off();
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  while (ctx.evaluations < budget) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-9) ==
        GSL_SUCCESS) {
      break;
    }
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);

  out.gait = ctx.best;
  out.residual = ctx.best_cost;
  out.evaluations = ctx.evaluations;
  return out;
}

}  // namespace sepsim
