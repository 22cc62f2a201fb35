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

#ifndef SEPSIM_CLI_HPP_
#define SEPSIM_CLI_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sepsim::cli {

enum ExitCode : int { kPass = 0, kCheckFail = 1, kConfigError = 2 };

struct RunConfig {
  std::string command;
  std::string model;
  std::string gait;
  std::string trace;  // simulate-subsystem input; defaults to <out>/trace.csv
  std::string out = ".";
  int steps = 10;
  std::uint32_t seed = 1;
  int samples = 200;
  int budget = 500;                  // refine-gait evaluations
  std::optional<double> tol;         // overrides the per-check thresholds
  std::optional<double> mass_delta;  // kg added to the human segments
};

int SimulateFull(const RunConfig& config);
int SimulateSubsystem(const RunConfig& config);
int VerifyCommand(const RunConfig& config);
int Robustness(const RunConfig& config);
int RefineGaitCommand(const RunConfig& config);

// Parses argv, applies SEPSIM_LOG, runs the command, maps errors to exit codes.
int Main(int argc, char** argv);

// Report path of a command run: <out>/<command>.json
std::string ReportPath(const RunConfig& config);

}  // namespace sepsim::cli

#endif  // SEPSIM_CLI_HPP_
