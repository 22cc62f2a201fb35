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
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/spdlog.h>

#include "sepsim/cli.hpp"
#include "sepsim/prosthesis.hpp"

namespace sepsim::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string OutPath(const RunConfig& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

void Prepare(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw Error(ErrorKind::kConfig, "cannot create output directory " + c.out);
}

AmputeeConfig ModelConfig(const RunConfig& c) {
  AmputeeConfig m = LoadAmputeeConfig(c.model);
  if (c.mass_delta) m.mass_delta += *c.mass_delta;
  return m;
}

json CheckJson(const CheckReport& r) {
  json j{{"name", r.name},
         {"passed", r.passed},
         {"residual", r.residual},
         {"threshold", r.threshold},
         {"samples", r.samples}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

void WriteReport(const RunConfig& c, json report) {
  report["command"] = c.command;
  std::ofstream f(ReportPath(c));
  if (!f) throw Error(ErrorKind::kConfig, "cannot write report " + ReportPath(c));
  f << report.dump(2) << '\n';
}

void WriteSteps(const Trace& tr, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot write " + path);
  f << "step,domain,t_start,t_end,duration,guard_hit,max_constraint_residual,"
       "poincare_residual\n";
  const std::vector<double> res = PoincareResiduals(tr);
  int pt_seen = 0;
  for (const DomainRecord& d : tr.domains) {
    std::string r;
    // Residual between this pt entry and the previous one.
    if (d.vertex == Vertex::kPt) {
      if (pt_seen > 0 && pt_seen - 1 < static_cast<int>(res.size())) {
        r = FormatDouble(res[pt_seen - 1]);
      }
      ++pt_seen;
    }
    f << d.step << ',' << VertexName(d.vertex) << ',' << FormatDouble(d.t_start) << ','
      << FormatDouble(d.t_end) << ',' << FormatDouble(d.t_end - d.t_start) << ','
      << (d.guard_hit ? 1 : 0) << ',' << FormatDouble(d.max_constraint_residual) << ','
      << r << '\n';
  }
}

json ReplayJson(const ReplayResult& r, double tol) {
  json domains = json::array();
  for (const ReplayDomain& d : r.domains) {
    domains.push_back({{"step", d.step},
                       {"domain", VertexName(d.vertex)},
                       {"samples", d.samples},
                       {"max_state_error", d.max_state_error},
                       {"max_output_error", d.max_output_error},
                       {"passed", d.max_state_error <= tol}});
  }
  return {{"domains", domains},
          {"max_state_error", r.max_state_error},
          {"max_output_error", r.max_output_error},
          {"tolerance", tol}};
}

}  // namespace

std::string ReportPath(const RunConfig& c) { return OutPath(c, c.command + ".json"); }

int SimulateFull(const RunConfig& c) {
  Stopwatch clock;
  Prepare(c);
  const AmputeeSystem sys(ModelConfig(c));
  const GaitParams gait = LoadGait(c.gait);
  if (c.steps < 0) throw Error(ErrorKind::kConfig, "--steps must be >= 0");
  json report{{"model", c.model}, {"gait", c.gait}, {"steps_requested", c.steps}};
  try {
    const Trace tr = SimulateWalk(sys, gait, InitialState(sys, gait), c.steps);
    WriteTraceCsv(tr, OutPath(c, "trace.csv"));
    WriteImpactsCsv(tr, OutPath(c, "impacts.csv"));
    WriteSteps(tr, OutPath(c, "steps.csv"));
    const std::vector<double> res = PoincareResiduals(tr);
    double max_residual = 0.0;
    for (const DomainRecord& d : tr.domains) {
      max_residual = std::max(max_residual, d.max_constraint_residual);
    }
    report["status"] = "completed";
    report["steps_completed"] = static_cast<int>(tr.impacts.size());
    report["final_time"] = tr.samples.empty() ? 0.0 : tr.samples.back().t;
    report["max_constraint_residual"] = max_residual;
    report["last_poincare_residual"] = res.empty() ? json(nullptr) : json(res.back());
    report["runtime_s"] = clock.seconds();
    WriteReport(c, report);
    spdlog::info("simulate-full: {} steps in {:.1f} s", tr.impacts.size(), clock.seconds());
    return kPass;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig || e.kind() == ErrorKind::kSchema) throw;
    report["status"] = ErrorKindName(e.kind());
    report["diagnostic"] = e.what();
    report["runtime_s"] = clock.seconds();
    WriteReport(c, report);
    spdlog::error("simulate-full: {}", e.what());
    return kCheckFail;
  }
}

int SimulateSubsystem(const RunConfig& c) {
  Stopwatch clock;
  Prepare(c);
  const AmputeeSystem sys(ModelConfig(c));
  const GaitParams gait = LoadGait(c.gait);
  const std::string path = c.trace.empty() ? OutPath(c, "trace.csv") : c.trace;
  if (!fs::exists(path)) throw Error(ErrorKind::kConfig, "trace file not found: " + path);
  const Trace tr = ReadTraceCsv(path);
  const double tol = c.tol.value_or(1e-6);
  const ReplayResult r = ReplaySubsystem(sys, gait, tr);
  WriteReplayCsv(r, OutPath(c, "subsystem.csv"));
  json report = ReplayJson(r, tol);
  report["trace"] = path;
  const bool ok = r.max_state_error <= tol;
  report["passed"] = ok;
  report["runtime_s"] = clock.seconds();
  WriteReport(c, report);
  spdlog::info("simulate-subsystem: max |x_s - xbar_s| = {:.3e} over {} domains",
               r.max_state_error, r.domains.size());
  return ok ? kPass : kCheckFail;
}

int VerifyCommand(const RunConfig& c) {
  Stopwatch clock;
  Prepare(c);
  const AmputeeSystem sys(ModelConfig(c));
  const GaitParams gait = LoadGait(c.gait);
  VerifyOptions opt;
  opt.samples = c.samples;
  opt.seed = c.seed;
  if (c.tol) {
    opt.separability_tol = opt.equivalence_tol = opt.output_tol = opt.law_tol = *c.tol;
  }
  const std::vector<DomainVerification> v = Verify(sys, gait, opt);
  json domains = json::array();
  bool ok = true;
  for (const DomainVerification& d : v) {
    const bool pass = d.passed();
    ok = ok && pass;
    domains.push_back({{"domain", VertexName(d.vertex)},
                       {"passed", pass},
                       {"separability", CheckJson(d.separability)},
                       {"subsystem_equivalence", CheckJson(d.equivalence)},
                       {"output_locality", CheckJson(d.outputs.locality)},
                       {"output_drift_terms", CheckJson(d.outputs.drift_terms)},
                       {"output_input_terms", CheckJson(d.outputs.input_terms)},
                       {"separable_law", CheckJson(d.ssc_law)},
                       {"measured_law", CheckJson(d.measured_law)}});
    for (const CheckReport* r : {&d.separability, &d.equivalence, &d.outputs.locality,
                                 &d.outputs.drift_terms, &d.outputs.input_terms, &d.ssc_law,
                                 &d.measured_law}) {
      std::cout << fmt::format("{} {:<4} {:<28} residual {:.3e} (<= {:.0e})\n",
                               r->passed ? "PASS" : "FAIL", VertexName(d.vertex), r->name,
                               r->residual, r->threshold);
    }
  }
  WriteReport(c, {{"model", c.model},
                  {"gait", c.gait},
                  {"samples", c.samples},
                  {"seed", c.seed},
                  {"passed", ok},
                  {"domains", domains},
                  {"runtime_s", clock.seconds()}});
  std::cout << (ok ? "verify: PASS" : "verify: FAIL") << '\n';
  return ok ? kPass : kCheckFail;
}

int Robustness(const RunConfig& c) {
  Stopwatch clock;
  Prepare(c);
  RunConfig rc = c;
  if (!rc.mass_delta) rc.mass_delta = 24.9;
  const AmputeeSystem sys(ModelConfig(rc));
  const GaitParams gait = LoadGait(c.gait);
  const double tol = c.tol.value_or(1e-6);
  json report{{"model", c.model},
              {"gait", c.gait},
              {"mass_delta", *rc.mass_delta},
              {"human_mass", sys.layout().human_mass},
              {"steps_requested", c.steps}};
  Trace tr;
  try {
    tr = SimulateWalk(sys, gait, InitialState(sys, gait), c.steps);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig || e.kind() == ErrorKind::kSchema) throw;
    report["status"] = ErrorKindName(e.kind());
    report["diagnostic"] = e.what();
    WriteReport(c, report);
    spdlog::error("robustness: {}", e.what());
    return kCheckFail;
  }
  WriteTraceCsv(tr, OutPath(c, "robustness_trace.csv"));
  const ReplayResult r = ReplaySubsystem(sys, gait, tr);
  WriteReplayCsv(r, OutPath(c, "robustness_tracking.csv"));
  const bool ok = r.max_output_error <= tol;
  report["status"] = "completed";
  report["steps_completed"] = static_cast<int>(tr.impacts.size());
  report["replay"] = ReplayJson(r, tol);
  report["max_output_tracking_error"] = r.max_output_error;
  report["passed"] = ok;
  report["runtime_s"] = clock.seconds();
  WriteReport(c, report);
  spdlog::info("robustness: mass delta {} kg, max |y_s| = {:.3e}", *rc.mass_delta,
               r.max_output_error);
  return ok ? kPass : kCheckFail;
}

int RefineGaitCommand(const RunConfig& c) {
  Stopwatch clock;
  Prepare(c);
  const AmputeeSystem sys(ModelConfig(c));
  const GaitParams gait0 = LoadGait(c.gait);
  if (c.budget < 0) throw Error(ErrorKind::kConfig, "--budget must be >= 0");
  // The start state must reach a full cycle before refinement can compare.
  const double initial = CycleResidual(sys, gait0);
  const RefineResult r = RefineGait(
      gait0, [&sys](const GaitParams& g) { return CycleResidual(sys, g); }, c.budget, c.seed);
  GaitParams out = r.gait;
  out.provenance = fmt::format(
      "refined from {} on {}: cycle residual {:.6g} -> {:.6g} in {} evaluations (seed {})",
      fs::path(c.gait).filename().string(), fs::path(c.model).filename().string(), initial,
      r.residual, r.evaluations, c.seed);
  SaveGait(out, OutPath(c, "refined.gait"));
  WriteReport(c, {{"model", c.model},
                  {"gait", c.gait},
                  {"budget", c.budget},
                  {"seed", c.seed},
                  {"initial_residual", r.initial_residual},
                  {"residual", r.residual},
                  {"evaluations", r.evaluations},
                  {"reduction", r.residual > 0.0 ? r.initial_residual / r.residual : 0.0},
                  {"runtime_s", clock.seconds()}});
  spdlog::info("refine-gait: {:.4g} -> {:.4g} in {} evaluations", r.initial_residual,
               r.residual, r.evaluations);
  return kPass;
}

int Main(int argc, char** argv) {
  if (const char* level = std::getenv("SEPSIM_LOG")) {
    spdlog::cfg::helpers::load_levels(level);
  } else {
    spdlog::set_level(spdlog::level::warn);
  }

  CLI::App app{"sepsim: planar amputee-prosthesis simulation and verification"};
  app.require_subcommand(1);
  RunConfig c;
  c.model = std::string(SEPSIM_CONFIG_DIR) + "/model1.yaml";
  c.gait = std::string(SEPSIM_CONFIG_DIR) + "/reference.gait";
  double tol = 0.0, delta = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", c.model, "model file (sepsim-model v1)")->capture_default_str();
    sub->add_option("--gait", c.gait, "gait file (sepsim-gait v1)")->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--tol", tol, "override check tolerance");
    sub->add_option("--mass-delta", delta, "kg added to the human segments");
  };
  CLI::App* full = app.add_subcommand("simulate-full", "walk the full model");
  CLI::App* subsys = app.add_subcommand("simulate-subsystem", "replay the prosthesis subsystem");
  CLI::App* verify = app.add_subcommand("verify", "run the checker battery");
  CLI::App* robust = app.add_subcommand("robustness", "walk a heavier human and replay");
  CLI::App* refine = app.add_subcommand("refine-gait", "derivative-free gait refinement");
  for (CLI::App* s : {full, subsys, verify, robust, refine}) common(s);
  for (CLI::App* s : {full, robust}) {
    s->add_option("--steps", c.steps, "number of steps")->capture_default_str();
  }
  subsys->add_option("--trace", c.trace, "full-system trace CSV (default <out>/trace.csv)");
  verify->add_option("--samples", c.samples, "admissible states per domain")
      ->capture_default_str();
  refine->add_option("--budget", c.budget, "residual evaluations")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }
  for (CLI::App* s : app.get_subcommands()) c.command = s->get_name();
  for (CLI::App* s : app.get_subcommands()) {
    if (s->count("--tol")) {
      if (!(tol > 0.0)) {
        std::cerr << "sepsim: --tol must be positive\n";
        return kConfigError;
      }
      c.tol = tol;
    }
    if (s->count("--mass-delta")) c.mass_delta = delta;
  }

  try {
    if (c.command == "simulate-full") return SimulateFull(c);
    if (c.command == "simulate-subsystem") return SimulateSubsystem(c);
    if (c.command == "verify") return VerifyCommand(c);
    if (c.command == "robustness") return Robustness(c);
    return RefineGaitCommand(c);
  } catch (const Error& e) {
    std::cerr << "sepsim " << c.command << ": " << e.what() << '\n';
    const bool config = e.kind() == ErrorKind::kConfig || e.kind() == ErrorKind::kSchema;
    return config ? kConfigError : kCheckFail;
  } catch (const std::exception& e) {
    std::cerr << "sepsim " << c.command << ": " << e.what() << '\n';
    return kCheckFail;
  }
}

}  // namespace sepsim::cli
