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

#include "gpdp/pipeline.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gpdp/errors.h"
#include "test_support.h"

namespace gpdp {
namespace {

namespace fs = std::filesystem;

RunConfig StubConfig(const std::string& data_dir) {
  RunConfig c;
  c.data.dir = data_dir;
  c.data.transitions = 400;
  c.data.seed = 3;
  c.optimizer.critic_steps = 10;
  c.optimizer.eps_steps = 10;
  c.optimizer.batch_size = 16;
  c.optimizer.hidden_width = 8;
  c.optimizer.hidden_layers = 2;
  c.gpr.iterations = 5;
  c.gpr.restarts = 1;
  c.gpr.cap = 64;
  c.policy.candidates = 4;
  c.eval.seeds = {0, 1};
  c.eval.far_field_draws = 20;
  c.eval.far_field_permutations = 9;
  c.env.horizon = 20;
  c.eval.shift.trigger_step = 3;
  c.eval.shift.duration = 5;
  return c;
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = testing::MakeTempDir("gpdp_pipe");
    fs::create_directories(root_ + "/data");
    config_ = StubConfig(root_ + "/data");
    GenerateData(config_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string root_;
  RunConfig config_;
};

std::vector<std::vector<std::string>> ReadCsv(const std::string& path, std::string* header) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  if (header) *header = line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(PipelineTest, StubRunWritesBundleAndTenRowsPerStage) {
  const std::string bundle = root_ + "/bundle";
  const TrainSummary s = Train(config_, bundle);
  EXPECT_EQ(s.ran, (std::vector<int>{0, 1, 2, 3}));
  for (const char* f : {kBundleConfig, kCriticQFile, kCriticQTargetFile, kCriticVFile, kEpsFile,
                        kRelabelFile, kGprFile, kMetricsFile}) {
    EXPECT_TRUE(fs::exists(bundle + "/" + f)) << f;
  }
  std::string header;
  const auto rows = ReadCsv(bundle + "/" + kMetricsFile, &header);
  EXPECT_EQ(header, "step,stage,loss");
  std::map<std::string, int> per_stage;
  for (const auto& r : rows) {
    ASSERT_EQ(r.size(), 3u);
    per_stage[r[1]]++;
    EXPECT_TRUE(std::isfinite(std::stod(r[2])));
  }
  EXPECT_EQ(per_stage.size(), 3u);
  for (const auto& [stage, n] : per_stage) EXPECT_EQ(n, 10) << stage;
  const PolicyBundle b = LoadBundle(bundle);
  EXPECT_EQ(b.guidance.num_points(), b.trajectory.states.rows());
  EXPECT_LE(b.guidance.num_points(), config_.gpr.cap);
}

TEST_F(PipelineTest, ResumeHonorsStageMarkers) {
  const std::string bundle = root_ + "/bundle";
  TrainOptions first;
  first.stop_after_stages = 2;
  const TrainSummary a = Train(config_, bundle, first);
  EXPECT_EQ(a.ran, (std::vector<int>{0, 1}));
  EXPECT_TRUE(fs::exists(StageMarkerPath(bundle, 1)));
  EXPECT_FALSE(fs::exists(StageMarkerPath(bundle, 2)));
  EXPECT_THROW(LoadBundle(bundle), BundleError);
  const TrainSummary b = Train(config_, bundle);
  EXPECT_EQ(b.skipped, (std::vector<int>{0, 1}));
  EXPECT_EQ(b.ran, (std::vector<int>{2, 3}));
  EXPECT_NO_THROW(LoadBundle(bundle));
}

TEST_F(PipelineTest, MissingDatasetIsAnIoError) {
  RunConfig c = config_;
  c.data.dir = root_ + "/nowhere";
  EXPECT_THROW(Train(c, root_ + "/bundle"), IoError);
}

TEST_F(PipelineTest, ZeroActionEpisodeBookkeeping) {
  EnvParams env = config_.env;
  env.horizon = 5;
  const PolicyFactory zero = [](Rng&) -> ActionFn {
    return [](const Eigen::VectorXd&, int) { return Eigen::VectorXd(Eigen::Vector2d::Zero()); };
  };
  const std::string out = root_ + "/eval";
  fs::create_directories(out);
  std::vector<EpisodeTrace> traces;
  const EvalReport r =
      EvaluatePolicy(env, ShiftSpec{}, Condition::kNormal, {7}, "zero", zero, out, 1, &traces);
  ASSERT_EQ(r.returns.size(), 1u);
  // Independent replay: drag-only coasting from the recorded start state.
  const Eigen::VectorXd& obs0 = traces[0].observations[0];
  Eigen::Vector2d p = obs0.head<2>();
  Eigen::Vector2d v = obs0.segment<2>(2);
  double expected = 0.0;
  for (int t = 0; t < 5; ++t) {
    v *= 1.0 - env.drag * env.dt;
    p += v * env.dt;
    expected -= (p - env.goal).norm();
  }
  EXPECT_NEAR(r.returns[0], expected, 1e-12);
  const auto rows = ReadCsv(out + "/" + r.trace_paths[0], nullptr);
  ASSERT_EQ(rows.size(), 5u);
  double from_csv = 0.0;
  for (const auto& row : rows) {
    from_csv += std::stod(row[1]);
    EXPECT_EQ(row[2], "normal");
  }
  EXPECT_EQ(from_csv, r.returns[0]);
}

TEST_F(PipelineTest, ReportMeanIsArithmeticMean) {
  const PolicyFactory wobble = [](Rng& rng) -> ActionFn {
    return [&rng](const Eigen::VectorXd&, int) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      return Eigen::VectorXd(Eigen::Vector2d(u(rng), u(rng)));
    };
  };
  std::vector<std::uint64_t> seeds(10);
  for (int i = 0; i < 10; ++i) seeds[static_cast<std::size_t>(i)] = 100 + i;
  const EvalReport r = EvaluatePolicy(config_.env, config_.eval.shift, Condition::kShift, seeds,
                                      "wobble", wobble, "", 3);
  double sum = 0.0, max = -1e300;
  for (double x : r.returns) {
    sum += x;
    max = std::max(max, x);
  }
  EXPECT_NEAR(r.mean, sum / 10.0, 1e-12);
  EXPECT_EQ(r.max, max);
  EXPECT_LE(r.mean, r.max);
  // Worker count does not change the numbers.
  const EvalReport serial = EvaluatePolicy(config_.env, config_.eval.shift, Condition::kShift,
                                           seeds, "wobble", wobble, "", 1);
  EXPECT_EQ(serial.returns, r.returns);
}

std::set<std::string> Keys(const nlohmann::json& j) {
  std::set<std::string> k;
  for (auto it = j.begin(); it != j.end(); ++it) k.insert(it.key());
  return k;
}

TEST_F(PipelineTest, UnguidedReportHasIdenticalSchema) {
  const std::string bundle = root_ + "/bundle";
  Train(config_, bundle);
  const EvalReport gpdp = Evaluate(bundle, config_, Condition::kNormal, PolicyKind::kGpdp,
                                   root_ + "/eval");
  const EvalReport greedy = Evaluate(bundle, config_, Condition::kNormal, PolicyKind::kGreedy,
                                     root_ + "/eval");
  EXPECT_EQ(Keys(ToJson(gpdp)), Keys(ToJson(greedy)));
  EXPECT_EQ(ToJson(greedy)["policy"], "greedy");
  EXPECT_TRUE(fs::exists(root_ + "/eval/report_greedy_normal.json"));
  const EvalReport shifted = Evaluate(bundle, config_, Condition::kShift, PolicyKind::kGpdp,
                                      root_ + "/eval");
  ASSERT_TRUE(shifted.far_field.has_value());
  for (const char* key : {"p_value", "energy_statistic", "passed", "min_scaled_distance"}) {
    EXPECT_TRUE(shifted.far_field->contains(key)) << key;
  }
}

TEST_F(PipelineTest, InspectSummarizesBundle) {
  const std::string bundle = root_ + "/bundle";
  Train(config_, bundle);
  const nlohmann::json j = Inspect(bundle);
  EXPECT_TRUE(j.contains("stages"));
  EXPECT_TRUE(j.contains("gpr"));
}

// --- command-line front end ---------------------------------------------

int RunCli(const std::string& args) {
  const std::string cmd = std::string(GPDP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string WriteConfig(const std::string& dir, const RunConfig& c) {
  const std::string path = dir + "/run.json";
  std::ofstream(path) << ToJson(c).dump(2);
  return path;
}

TEST_F(PipelineTest, CliGenDataIsDeterministic) {
  fs::create_directories(root_ + "/a");
  fs::create_directories(root_ + "/b");
  const std::string cfg = WriteConfig(root_, config_);
  ASSERT_EQ(RunCli("gen-data --config " + cfg + " --data.dir " + root_ + "/a"), 0);
  ASSERT_EQ(RunCli("gen-data --config " + cfg + " --data.dir=" + root_ + "/b"), 0);
  EXPECT_EQ(testing::Sha256File(root_ + "/a/dataset.jsonl"),
            testing::Sha256File(root_ + "/b/dataset.jsonl"));
  const auto meta = nlohmann::json::parse(std::ifstream(root_ + "/a/dataset.meta.json"));
  EXPECT_GE(meta["n_transitions"].get<long>(), config_.data.transitions);
}

TEST_F(PipelineTest, CliExitCodes) {
  const std::string cfg = WriteConfig(root_, config_);
  EXPECT_EQ(RunCli("gen-data --config " + cfg + " --critic.tau 1.5"), 2);
  EXPECT_EQ(RunCli("gen-data --config " + cfg + " --critic.nonsense 1"), 2);
  EXPECT_EQ(RunCli("frobnicate"), 2);
  EXPECT_EQ(RunCli("gen-data --config " + cfg + " --data.dir " + root_ + "/missing"), 3);
  EXPECT_EQ(RunCli("eval --bundle " + root_ + "/no_bundle --config " + cfg), 5);
  fs::create_directories(root_ + "/partial");
  EXPECT_EQ(RunCli("eval --bundle " + root_ + "/partial --config " + cfg), 5);
  EXPECT_EQ(RunCli("train --config " + cfg + " --bundle " + root_ + "/nan" +
                   " --optimizer.learning_rate 1e300"),
            4);
}

TEST_F(PipelineTest, CliMissingDirMessageNamesPath) {
  const std::string cfg = WriteConfig(root_, config_);
  const std::string log = root_ + "/stderr.txt";
  const std::string cmd = std::string(GPDP_CLI_PATH) + " gen-data --config " + cfg +
                          " --data.dir " + root_ + "/missing 2>" + log;
  std::system(cmd.c_str());
  std::ifstream in(log);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find(root_ + "/missing"), std::string::npos) << text;
}

}  // namespace
}  // namespace gpdp
