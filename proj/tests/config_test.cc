// Copyright 2026 The GPDP Authors
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

#include "gpdp/config.h"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "gpdp/errors.h"
#include "test_support.h"

namespace gpdp {
namespace {

TEST(RunConfigTest, DefaultsMirrorTrainingRecipe) {
  const RunConfig c;
  EXPECT_EQ(c.critic.tau, 0.7);
  EXPECT_EQ(c.critic.eta, 0.005);
  EXPECT_EQ(c.critic.gamma, 0.99);
  EXPECT_EQ(c.optimizer.learning_rate, 3e-4);
  EXPECT_EQ(c.optimizer.batch_size, 256);
  EXPECT_EQ(c.policy.candidates, 16);
  EXPECT_EQ(c.policy.top_k, 1);
  EXPECT_EQ(c.eval.seeds.size(), 10u);
  EXPECT_NO_THROW(c.Validate());
}

TEST(RunConfigTest, JsonRoundTrip) {
  RunConfig c;
  c.critic.tau = 0.9;
  c.eval.seeds = {4, 5};
  c.eval.shift.mode = ShiftMode::kInverted;
  c.gpr.cap = 77;
  c.env.goal = Eigen::Vector2d(-0.5, 0.25);
  const nlohmann::json j = ToJson(c);
  EXPECT_EQ(ToJson(RunConfigFromJson(j)), j);
  EXPECT_EQ(j["schema_version"], kRunConfigSchemaVersion);
}

TEST(OverrideTest, DotPathSetsTypedValues) {
  nlohmann::json doc = ToJson(RunConfig{});
  ApplyOverride(doc, "critic.tau", "0.9");
  ApplyOverride(doc, "eval.seeds", "[1,2,3]");
  ApplyOverride(doc, "data.dir", "/tmp/somewhere");
  ApplyOverride(doc, "eval.shift.mode", "inverted");
  const RunConfig c = RunConfigFromJson(doc);
  EXPECT_EQ(c.critic.tau, 0.9);
  EXPECT_EQ(c.eval.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.data.dir, "/tmp/somewhere");
  EXPECT_EQ(c.eval.shift.mode, ShiftMode::kInverted);
}

TEST(OverrideTest, UnknownPathIsAConfigError) {
  nlohmann::json doc = ToJson(RunConfig{});
  EXPECT_THROW(ApplyOverride(doc, "critic.temperature", "1"), ConfigError);
  EXPECT_THROW(ApplyOverride(doc, "nonsense.tau", "1"), ConfigError);
}

TEST(LoadTest, FileThenOverrides) {
  const std::string dir = testing::MakeTempDir("gpdp_cfg");
  const std::string path = dir + "/run.json";
  std::ofstream(path) << R"({"critic": {"tau": 0.8}, "optimizer": {"batch_size": 32}})";
  const RunConfig c = LoadRunConfig(path, {{"critic.tau", "0.6"}});
  EXPECT_EQ(c.critic.tau, 0.6);
  EXPECT_EQ(c.optimizer.batch_size, 32);
  EXPECT_EQ(c.critic.gamma, 0.99);
  std::filesystem::remove_all(dir);
}

TEST(LoadTest, UnknownFieldInFileRejected) {
  const std::string dir = testing::MakeTempDir("gpdp_cfg");
  const std::string path = dir + "/run.json";
  std::ofstream(path) << R"({"critic": {"tauu": 0.8}})";
  EXPECT_THROW(LoadRunConfig(path, {}), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(LoadTest, MissingFileIsAConfigOrIoError) {
  EXPECT_ANY_THROW(LoadRunConfig("/nonexistent/run.json", {}));
}

TEST(ValidateTest, NamesTheOffendingField) {
  auto expect_field = [](RunConfig c, const std::string& field) {
    try {
      c.Validate();
      ADD_FAILURE() << "no error for " << field;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  RunConfig c;
  c.critic.tau = 1.0;
  expect_field(c, "critic.tau");
  c = RunConfig{};
  c.eval.seeds.clear();
  expect_field(c, "eval.seeds");
  c = RunConfig{};
  c.optimizer.batch_size = 0;
  expect_field(c, "optimizer.batch_size");
  c = RunConfig{};
  c.gpr.lower_bound = 10.0;
  c.gpr.upper_bound = 1.0;
  expect_field(c, "gpr.lower_bound");
  c = RunConfig{};
  c.eval.shift.actuator = 5;
  expect_field(c, "eval.shift.actuator");
}

TEST(GprOptionsTest, MapsBoundsToLogSpace) {
  RunConfig c;
  c.gpr.lower_bound = 1e-3;
  c.gpr.upper_bound = 10.0;
  c.optimizer.seed = 42;
  const GprFitOptions o = c.GprOptions();
  EXPECT_DOUBLE_EQ(o.log_lower, std::log(1e-3));
  EXPECT_DOUBLE_EQ(o.log_upper, std::log(10.0));
  EXPECT_EQ(o.seed, 42u);
  EXPECT_EQ(o.cap, c.gpr.cap);
}

}  // namespace
}  // namespace gpdp
