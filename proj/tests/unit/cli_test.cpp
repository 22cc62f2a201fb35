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

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "sepsim/cli.hpp"
#include "sepsim/hybrid.hpp"

namespace sepsim::cli {
namespace {

namespace fs = std::filesystem;

const std::string kConfigDir = SEPSIM_CONFIG_DIR;
const std::string kSeed = kConfigDir + "/seed.gait";

int Sepsim(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"sepsim"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : store) argv.push_back(s.data());
  return Main(static_cast<int>(argv.size()), argv.data());
}

std::string Slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

nlohmann::json Report(const fs::path& dir, const std::string& command) {
  std::ifstream f(dir / (command + ".json"));
  return nlohmann::json::parse(f);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("sepsim_cli_") + info->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Out(const std::string& sub = "") const { return (dir_ / sub).string(); }

  fs::path dir_;
};

TEST_F(CliTest, OneStepEndsAtFirstImpact) {
  ASSERT_EQ(Sepsim({"simulate-full", "--gait", kSeed, "--steps", "1", "--out", Out()}), kPass);
  const Trace tr = ReadTraceCsv(Out("trace.csv"));
  ASSERT_EQ(tr.domains.size(), 1u);
  EXPECT_EQ(tr.domains[0].vertex, Vertex::kPt);
  std::istringstream impacts(Slurp(Out("impacts.csv")));
  std::string header, row, extra;
  std::getline(impacts, header);
  std::getline(impacts, row);
  EXPECT_EQ(row.rfind("0,", 0), 0u);
  EXPECT_NE(row.find(",pt,pw,"), std::string::npos);
  EXPECT_FALSE(std::getline(impacts, extra));
  const nlohmann::json j = Report(dir_, "simulate-full");
  EXPECT_EQ(j["status"], "completed");
  EXPECT_EQ(j["steps_completed"], 1);
  EXPECT_TRUE(fs::exists(Out("impacts.csv")));
  EXPECT_TRUE(fs::exists(Out("steps.csv")));
}

TEST_F(CliTest, MissingGaitIsConfigError) {
  EXPECT_EQ(Sepsim({"simulate-full", "--gait", Out("absent.gait"), "--out", Out()}),
            kConfigError);
}

TEST_F(CliTest, BadArgumentsAreConfigErrors) {
  EXPECT_EQ(Sepsim({}), kConfigError);
  EXPECT_EQ(Sepsim({"no-such-command"}), kConfigError);
  EXPECT_EQ(Sepsim({"simulate-full", "--steps", "many"}), kConfigError);
  EXPECT_EQ(Sepsim({"verify", "--tol", "0", "--out", Out()}), kConfigError);
}

TEST_F(CliTest, CsvOutputIsDeterministic) {
  ASSERT_EQ(Sepsim({"simulate-full", "--gait", kSeed, "--steps", "2", "--out", Out("a")}), kPass);
  ASSERT_EQ(Sepsim({"simulate-full", "--gait", kSeed, "--steps", "2", "--out", Out("b")}), kPass);
  for (const char* f : {"trace.csv", "impacts.csv", "steps.csv"}) {
    EXPECT_EQ(Slurp(Out("a") + "/" + f), Slurp(Out("b") + "/" + f)) << f;
  }
}

TEST_F(CliTest, SubsystemReplayMatchesFullTrace) {
  ASSERT_EQ(Sepsim({"simulate-full", "--gait", kSeed, "--steps", "2", "--out", Out()}), kPass);
  ASSERT_EQ(Sepsim({"simulate-subsystem", "--gait", kSeed, "--out", Out()}), kPass);
  const nlohmann::json j = Report(dir_, "simulate-subsystem");
  EXPECT_EQ(j["domains"].size(), 2u);
  for (const auto& d : j["domains"]) EXPECT_LE(d["max_state_error"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(Out("subsystem.csv")));
}

TEST_F(CliTest, EmptyTraceIsSchemaError) {
  fs::create_directories(dir_);
  std::ofstream(Out("empty.csv")).close();
  EXPECT_EQ(Sepsim({"simulate-subsystem", "--gait", kSeed, "--trace", Out("empty.csv"), "--out",
                 Out()}),
            kConfigError);
}

TEST_F(CliTest, VerifyWithoutSamplesPassesVacuously) {
  EXPECT_EQ(Sepsim({"verify", "--gait", kSeed, "--samples", "0", "--out", Out()}), kPass);
  EXPECT_TRUE(Report(dir_, "verify")["passed"].get<bool>());
}

TEST_F(CliTest, VerifyPassesOnFewSamples) {
  EXPECT_EQ(Sepsim({"verify", "--gait", kSeed, "--samples", "5", "--out", Out()}), kPass);
  const nlohmann::json j = Report(dir_, "verify");
  ASSERT_EQ(j["domains"].size(), 2u);
  EXPECT_EQ(j["domains"][0]["separability"]["samples"], 5);
}

TEST_F(CliTest, ZeroMassDeltaReproducesBaseline) {
  ASSERT_EQ(Sepsim({"simulate-full", "--gait", kSeed, "--steps", "2", "--out", Out()}), kPass);
  ASSERT_EQ(Sepsim({"robustness", "--gait", kSeed, "--steps", "2", "--mass-delta", "0", "--out",
                 Out()}),
            kPass);
  EXPECT_EQ(Slurp(Out("trace.csv")), Slurp(Out("robustness_trace.csv")));
}

TEST_F(CliTest, HeavierHumanStillTracks) {
  ASSERT_EQ(Sepsim({"robustness", "--gait", kSeed, "--steps", "2", "--out", Out()}), kPass);
  const nlohmann::json j = Report(dir_, "robustness");
  EXPECT_DOUBLE_EQ(j["mass_delta"].get<double>(), 24.9);
  EXPECT_LE(j["max_output_tracking_error"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(Out("robustness_tracking.csv")));
}

TEST_F(CliTest, MassRemovalBeyondSegmentsIsConfigError) {
  EXPECT_EQ(Sepsim({"robustness", "--gait", kSeed, "--mass-delta", "-1000", "--out", Out()}),
            kConfigError);
}

TEST_F(CliTest, RefineWithoutBudgetKeepsGait) {
  ASSERT_EQ(Sepsim({"refine-gait", "--gait", kSeed, "--budget", "0", "--out", Out()}), kPass);
  const nlohmann::json j = Report(dir_, "refine-gait");
  EXPECT_EQ(j["evaluations"], 0);
  EXPECT_DOUBLE_EQ(j["residual"].get<double>(), j["initial_residual"].get<double>());
  EXPECT_TRUE(fs::exists(Out("refined.gait")));
}

}  // namespace
}  // namespace sepsim::cli
