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

#ifndef GPDP_PIPELINE_H_
#define GPDP_PIPELINE_H_

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "gpdp/config.h"
#include "gpdp/critic.h"
#include "gpdp/dataset.h"
#include "gpdp/diffusion.h"
#include "gpdp/gpr.h"
#include "gpdp/policy.h"

namespace gpdp {

// ---------------------------------------------------------------------------
// Bundle layout.

inline constexpr const char* kBundleConfig = "config.json";
inline constexpr const char* kCriticQFile = "critic_q.ckpt";
inline constexpr const char* kCriticQTargetFile = "critic_q_target.ckpt";
inline constexpr const char* kCriticVFile = "critic_v.ckpt";
inline constexpr const char* kEpsFile = "eps.ckpt";
inline constexpr const char* kRelabelFile = "relabel.json";
inline constexpr const char* kGprFile = "gpr.snapshot";
inline constexpr const char* kMetricsFile = "training_metrics.csv";
inline constexpr int kNumStages = 4;

// "critics", "eps", "relabel", "gpr".
const char* StageName(int stage);
// <bundle>/stage<k>_<name>.done
std::string StageMarkerPath(const std::string& bundle_dir, int stage);

std::string DatasetPath(const RunConfig& config);
DatasetConfig MakeDatasetConfig(const RunConfig& config);
std::vector<int> HiddenSizes(const RunConfig& config);
DiffusionSchedule MakeSchedule(const RunConfig& config);

// Generates the dataset and writes it under config.data.dir.
Dataset GenerateData(const RunConfig& config);

struct TrainOptions {
  // Stop (as if killed) after this many stages have been completed in this
  // call; negative runs to the end.
  int stop_after_stages = -1;
  std::ostream* log = nullptr;
};

struct TrainSummary {
  std::vector<int> ran;
  std::vector<int> skipped;
};

// Stages: critics -> noise model -> relabel -> GPR fit. Each stage leaves a
// marker and is skipped on later calls. Throws TrainingError on a non-finite
// loss and IoError/ConfigError on missing inputs.
TrainSummary Train(const RunConfig& config, const std::string& bundle_dir,
                   const TrainOptions& options = {});

// Everything needed at interaction time.
struct PolicyBundle {
  RunConfig config;  // as saved at training time
  CriticSet critics;
  EpsNet eps;
  GprModel guidance;
  BestTrajectory trajectory;
  AlteredActionSet altered;
  DiffusionSchedule schedule;
};

// Throws BundleError if any stage output is missing or unreadable.
PolicyBundle LoadBundle(const std::string& bundle_dir);

nlohmann::json RelabelToJson(const BestTrajectory& trajectory, const AlteredActionSet& altered);
void RelabelFromJson(const nlohmann::json& j, BestTrajectory& trajectory,
                     AlteredActionSet& altered);

// ---------------------------------------------------------------------------
// Evaluation.

enum class Condition { kNormal, kShift };
std::string ToString(Condition condition);
Condition ConditionFromString(const std::string& name);

// gpdp: guided sampling; greedy: argmax-Q over unguided samples;
// diffusion: one unguided sample.
enum class PolicyKind { kGpdp, kGreedy, kDiffusion };
std::string ToString(PolicyKind kind);

// Decision rule for one seed: observation, step index -> action.
using ActionFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;
// Builds the decision rule of one seed from that seed's policy RNG.
using PolicyFactory = std::function<ActionFn(Rng& policy_rng)>;

struct EpisodeTrace {
  std::vector<Eigen::VectorXd> observations;  // decision-time observations
  std::vector<double> rewards;
  std::vector<bool> shift_active;
  double total_return = 0.0;
};

// One episode; the initial state is drawn from `env_rng`.
EpisodeTrace RunEpisode(const EnvParams& env, const ShiftSpec& shift, Condition condition,
                        const ActionFn& act, Rng& env_rng);

struct EvalReport {
  Condition condition = Condition::kNormal;
  std::string policy;
  std::vector<std::uint64_t> seeds;
  std::vector<double> returns;
  double mean = 0.0;
  double max = 0.0;
  std::vector<std::string> trace_paths;
  std::optional<nlohmann::json> far_field;
};

nlohmann::json ToJson(const EvalReport& report);

// Runs one episode per seed on `workers` threads (0 = hardware
// concurrency). Seed k uses DeriveRng(k, 0) for the environment and
// DeriveRng(k, 1) for the policy. Writes trace_<policy>_<condition>_seed<k>.csv
// into `out_dir` when it is non-empty. `traces` (optional) receives the
// episodes in seed order.
EvalReport EvaluatePolicy(const EnvParams& env, const ShiftSpec& shift, Condition condition,
                          const std::vector<std::uint64_t>& seeds, const std::string& policy_name,
                          const PolicyFactory& factory, const std::string& out_dir, int workers,
                          std::vector<EpisodeTrace>* traces = nullptr);

// Guided vs unguided action samples at one state, compared by an energy
// distance permutation test.
nlohmann::json FarFieldCheck(const PolicyBundle& bundle, const Eigen::VectorXd& state, int draws,
                             int permutations, double alpha, Rng& rng);

// Loads the bundle, evaluates `kind` under `condition` with the env and
// eval sections of `config`, writes report_<policy>_<condition>.json and the
// traces into `out_dir`. The shifted GPDP report carries a far_field block
// for the shifted-phase state farthest from the guidance data.
EvalReport Evaluate(const std::string& bundle_dir, const RunConfig& config, Condition condition,
                    PolicyKind kind, const std::string& out_dir);

// Bundle / config summary for `gpdp inspect`.
nlohmann::json Inspect(const std::string& bundle_dir);

}  // namespace gpdp

#endif  // GPDP_PIPELINE_H_
