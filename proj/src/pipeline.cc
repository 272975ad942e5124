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

#include <algorithm>
#include <cstdarg>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "gpdp/errors.h"
#include "gpdp/nn.h"
#include "gpdp/random.h"
#include "gpdp/stats.h"

namespace gpdp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void Log(std::ostream* log, const char* fmt, ...) __attribute__((format(printf, 2, 3)));
void Log(std::ostream* log, const char* fmt, ...) {
  if (log == nullptr) return;
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  *log << buf << '\n';
  log->flush();
}

struct MetricRow {
  long step;
  const char* stage;
  double loss;
};

void AppendMetrics(const std::string& bundle_dir, const std::vector<MetricRow>& rows) {
  const std::string path = Join(bundle_dir, kMetricsFile);
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write " + path);
  if (fresh) out << "step,stage,loss\n";
  char line[128];
  for (const MetricRow& r : rows) {
    std::snprintf(line, sizeof(line), "%ld,%s,%.17g\n", r.step, r.stage, r.loss);
    out << line;
  }
  if (!out) throw IoError("failed writing " + path);
}

void TouchMarker(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "done\n";
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError(path + " is not valid JSON");
  return j;
}

json MatrixToJson(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd MatrixFromJson(const json& j, int cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (static_cast<int>(row.size()) != cols) throw IoError("relabel file: bad row width");
    for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[c];
  }
  return m;
}

Eigen::VectorXd VectorFromJson(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

CriticOptions MakeCriticOptions(const RunConfig& config) {
  CriticOptions o;
  o.expectile = config.critic.tau;
  o.soft_update_rate = config.critic.eta;
  o.discount = config.critic.gamma;
  o.hidden_sizes = HiddenSizes(config);
  o.adam.learning_rate = config.optimizer.learning_rate;
  return o;
}

ActionValueFn QFunction(const CriticSet& critics) {
  return [&critics](const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) {
    return critics.QValues(s, a);
  };
}

// --- stages ---------------------------------------------------------------

void RunCriticStage(const RunConfig& config, const Dataset& data, const std::string& bundle_dir,
                    Rng& rng, std::ostream* log) {
  CriticSet critics = CriticSet::Create(kStateDim, kActionDim, MakeCriticOptions(config), rng);
  // Optional (r - mean) / std with dataset statistics.
  double reward_shift = 0.0;
  double reward_scale = 1.0;
  if (config.critic.normalize_rewards) {
    const DatasetStats stats = ComputeStats(data);
    reward_shift = stats.reward_mean;
    if (stats.reward_std > 0.0) reward_scale = 1.0 / stats.reward_std;
  }
  std::vector<MetricRow> rows;
  const long steps = config.optimizer.critic_steps;
  for (long step = 0; step < steps; ++step) {
    TransitionBatch batch = SampleBatch(data, config.optimizer.batch_size, rng);
    if (config.critic.normalize_rewards) {
      batch.rewards = (batch.rewards.array() - reward_shift) * reward_scale;
    }
    double v_loss = 0.0;
    double q_loss = 0.0;
    try {
      v_loss = UpdateValue(critics, batch.states, batch.actions);
    } catch (const NonFiniteError&) {
      throw TrainingError("critic_v", step);
    }
    if (!std::isfinite(v_loss)) throw TrainingError("critic_v", step);
    try {
      q_loss = UpdateQ(critics, batch);
    } catch (const NonFiniteError&) {
      throw TrainingError("critic_q", step);
    }
    if (!std::isfinite(q_loss)) throw TrainingError("critic_q", step);
    SoftUpdateTarget(critics);
    if (step % config.optimizer.log_every == 0) {
      rows.push_back({step, "critic_q", q_loss});
      rows.push_back({step, "critic_v", v_loss});
    }
    if (log != nullptr && (step + 1) % std::max(1L, steps / 10) == 0) {
      Log(log, "critics %ld/%ld  q_loss %.6g  v_loss %.6g", step + 1, steps, q_loss, v_loss);
    }
  }
  critics.Validate();
  SaveCheckpoint(critics.q_net, Join(bundle_dir, kCriticQFile));
  SaveCheckpoint(critics.q_target, Join(bundle_dir, kCriticQTargetFile));
  SaveCheckpoint(critics.v_net, Join(bundle_dir, kCriticVFile));
  AppendMetrics(bundle_dir, rows);
}

void RunEpsStage(const RunConfig& config, const Dataset& data, const std::string& bundle_dir,
                 Rng& rng, std::ostream* log) {
  const DiffusionSchedule schedule = MakeSchedule(config);
  const std::vector<int> hidden = HiddenSizes(config);
  EpsNet eps = EpsNet::Create(kStateDim, kActionDim, hidden, rng);
  AdamOptions adam_options;
  adam_options.learning_rate = config.optimizer.learning_rate;
  AdamState adam(eps.net(), adam_options);
  std::vector<MetricRow> rows;
  const long steps = config.optimizer.eps_steps;
  for (long step = 0; step < steps; ++step) {
    const TransitionBatch batch = SampleBatch(data, config.optimizer.batch_size, rng);
    const EpsLossResult result = EpsLoss(eps, batch.states, batch.actions, schedule, rng);
    if (!std::isfinite(result.loss)) throw TrainingError("eps", step);
    try {
      AdamStep(eps.mutable_net(), result.gradients, adam);
    } catch (const NonFiniteError&) {
      throw TrainingError("eps", step);
    }
    if (step % config.optimizer.log_every == 0) rows.push_back({step, "eps", result.loss});
    if (log != nullptr && (step + 1) % std::max(1L, steps / 10) == 0) {
      Log(log, "eps %ld/%ld  loss %.6g", step + 1, steps, result.loss);
    }
  }
  if (!eps.net().AllFinite()) throw TrainingError("eps", steps);
  SaveCheckpoint(eps.net(), Join(bundle_dir, kEpsFile));
  AppendMetrics(bundle_dir, rows);
}

CriticSet LoadCritics(const std::string& bundle_dir, const RunConfig& config) {
  CriticSet c;
  c.q_net = LoadCheckpoint(Join(bundle_dir, kCriticQFile));
  c.q_target = LoadCheckpoint(Join(bundle_dir, kCriticQTargetFile));
  c.v_net = LoadCheckpoint(Join(bundle_dir, kCriticVFile));
  c.expectile = config.critic.tau;
  c.soft_update_rate = config.critic.eta;
  c.discount = config.critic.gamma;
  c.Validate();
  return c;
}

EpsNet LoadEps(const std::string& bundle_dir) {
  return EpsNet(LoadCheckpoint(Join(bundle_dir, kEpsFile)), kStateDim, kActionDim);
}

void RunRelabelStage(const RunConfig& config, const Dataset& data, const std::string& bundle_dir,
                     Rng& rng, std::ostream* log) {
  const CriticSet critics = LoadCritics(bundle_dir, config);
  const EpsNet eps = LoadEps(bundle_dir);
  const BestTrajectory best = SelectBestTrajectory(data, config.gpr.cap, config.policy.top_k);
  RelabelOptions options;
  options.candidates = config.policy.candidates;
  options.include_original = config.policy.include_original;
  const AlteredActionSet altered =
      Relabel(best, eps, MakeSchedule(config), QFunction(critics), options, rng);
  Log(log, "relabel: episode %d, return %.6g, %ld states", best.episode, best.total_return,
      static_cast<long>(best.states.rows()));
  WriteText(Join(bundle_dir, kRelabelFile), RelabelToJson(best, altered).dump(1) + "\n");
}

void RunGprStage(const RunConfig& config, const std::string& bundle_dir, std::ostream* log) {
  BestTrajectory best;
  AlteredActionSet altered;
  RelabelFromJson(ReadJsonFile(Join(bundle_dir, kRelabelFile)), best, altered);
  const GprModel model = BuildGuidance(best, altered, DefaultGuidanceInit(altered.actions),
                                       config.GprOptions());
  const KernelHyperparams& hp = model.hyperparams();
  Log(log, "gpr: sigma_n %.4g  sigma_p %.4g  length %.4g  nll %.6g", hp.noise_std(), hp.signal_std(),
      hp.length_scale(), model.NegativeLogLikelihood());
  SaveGprSnapshot(model, Join(bundle_dir, kGprFile));
}

bool StageDone(const std::string& bundle_dir, int stage) {
  return fs::exists(StageMarkerPath(bundle_dir, stage));
}

}  // namespace

// --- layout helpers -------------------------------------------------------

const char* StageName(int stage) {
  static constexpr const char* kNames[kNumStages] = {"critics", "eps", "relabel", "gpr"};
  if (stage < 0 || stage >= kNumStages) throw ContractError("stage index out of range");
  return kNames[stage];
}

std::string StageMarkerPath(const std::string& bundle_dir, int stage) {
  return Join(bundle_dir, "stage" + std::to_string(stage) + "_" + StageName(stage) + ".done");
}

std::string DatasetPath(const RunConfig& config) {
  return Join(config.data.dir, "dataset.jsonl");
}

DatasetConfig MakeDatasetConfig(const RunConfig& config) {
  DatasetConfig d;
  d.transitions = config.data.transitions;
  d.shift_fraction = config.data.shift_fraction;
  d.seed = config.data.seed;
  d.env = config.env;
  d.shift = config.eval.shift;
  return d;
}

std::vector<int> HiddenSizes(const RunConfig& config) {
  return std::vector<int>(config.optimizer.hidden_layers, config.optimizer.hidden_width);
}

DiffusionSchedule MakeSchedule(const RunConfig& config) {
  return MakeSchedule(config.schedule.steps, config.schedule.beta_min, config.schedule.beta_max);
}

Dataset GenerateData(const RunConfig& config) {
  config.Validate();
  const DatasetConfig dc = MakeDatasetConfig(config);
  Dataset dataset = GenerateDataset(dc);
  WriteDataset(dataset, dc, config.data.dir);
  return dataset;
}

// --- training -------------------------------------------------------------

TrainSummary Train(const RunConfig& config, const std::string& bundle_dir,
                   const TrainOptions& options) {
  config.Validate();
  std::error_code ec;
  fs::create_directories(bundle_dir, ec);
  if (ec || !fs::is_directory(bundle_dir)) {
    throw IoError("cannot create bundle directory " + bundle_dir);
  }
  WriteText(Join(bundle_dir, kBundleConfig), ToJson(config).dump(2) + "\n");

  TrainSummary summary;
  std::optional<Dataset> data;
  auto dataset = [&]() -> const Dataset& {
    if (!data) {
      const std::string path = DatasetPath(config);
      if (!fs::exists(path)) throw IoError("dataset not found: " + path);
      data = ReadDataset(path);
      if (data->transitions.empty()) throw IoError("dataset is empty: " + path);
    }
    return *data;
  };

  int completed = 0;
  for (int stage = 0; stage < kNumStages; ++stage) {
    if (StageDone(bundle_dir, stage)) {
      Log(options.log, "stage %d (%s): already done, skipping", stage, StageName(stage));
      summary.skipped.push_back(stage);
      continue;
    }
    if (options.stop_after_stages >= 0 && completed >= options.stop_after_stages) break;
    Log(options.log, "stage %d (%s)", stage, StageName(stage));
    Rng rng = DeriveRng(config.optimizer.seed, static_cast<std::uint64_t>(stage));
    switch (stage) {
      case 0: RunCriticStage(config, dataset(), bundle_dir, rng, options.log); break;
      case 1: RunEpsStage(config, dataset(), bundle_dir, rng, options.log); break;
      case 2: RunRelabelStage(config, dataset(), bundle_dir, rng, options.log); break;
      case 3: RunGprStage(config, bundle_dir, options.log); break;
    }
    TouchMarker(StageMarkerPath(bundle_dir, stage));
    summary.ran.push_back(stage);
    ++completed;
  }
  return summary;
}

// --- bundle ---------------------------------------------------------------

json RelabelToJson(const BestTrajectory& trajectory, const AlteredActionSet& altered) {
  return {
      {"episode", trajectory.episode},
      {"episodes", trajectory.episodes},
      {"total_return", trajectory.total_return},
      {"states", MatrixToJson(trajectory.states)},
      {"actions", MatrixToJson(trajectory.actions)},
      {"altered_actions", MatrixToJson(altered.actions)},
      {"q_values", std::vector<double>(altered.q_values.begin(), altered.q_values.end())},
      {"original_q_values",
       std::vector<double>(altered.original_q_values.begin(), altered.original_q_values.end())},
      {"chosen", altered.chosen},
      {"candidates", altered.candidates},
      {"includes_original", altered.includes_original},
  };
}

void RelabelFromJson(const json& j, BestTrajectory& trajectory, AlteredActionSet& altered) {
  try {
    trajectory.episode = j.at("episode").get<int>();
    trajectory.episodes = j.at("episodes").get<std::vector<int>>();
    trajectory.total_return = j.at("total_return").get<double>();
    trajectory.states = MatrixFromJson(j.at("states"), kStateDim);
    trajectory.actions = MatrixFromJson(j.at("actions"), kActionDim);
    altered.actions = MatrixFromJson(j.at("altered_actions"), kActionDim);
    altered.q_values = VectorFromJson(j.at("q_values"));
    altered.original_q_values = VectorFromJson(j.at("original_q_values"));
    altered.chosen = j.at("chosen").get<std::vector<int>>();
    altered.candidates = j.at("candidates").get<int>();
    altered.includes_original = j.at("includes_original").get<bool>();
  } catch (const json::exception& e) {
    throw IoError(std::string("relabel file: ") + e.what());
  }
}

PolicyBundle LoadBundle(const std::string& bundle_dir) {
  for (int stage = 0; stage < kNumStages; ++stage) {
    if (!StageDone(bundle_dir, stage)) {
      throw BundleError("bundle " + bundle_dir + " is incomplete: stage " +
                        std::to_string(stage) + " (" + StageName(stage) + ") has not finished");
    }
  }
  PolicyBundle b;
  try {
    b.config = RunConfigFromJson(ReadJsonFile(Join(bundle_dir, kBundleConfig)));
    b.critics = LoadCritics(bundle_dir, b.config);
    b.eps = LoadEps(bundle_dir);
    b.guidance = LoadGprSnapshot(Join(bundle_dir, kGprFile));
    RelabelFromJson(ReadJsonFile(Join(bundle_dir, kRelabelFile)), b.trajectory, b.altered);
    b.schedule = MakeSchedule(b.config);
  } catch (const BundleError&) {
    throw;
  } catch (const std::exception& e) {
    throw BundleError("bundle " + bundle_dir + " is unreadable: " + e.what());
  }
  return b;
}

// --- evaluation -----------------------------------------------------------

std::string ToString(Condition condition) {
  return condition == Condition::kShift ? "shift" : "normal";
}

Condition ConditionFromString(const std::string& name) {
  if (name == "normal") return Condition::kNormal;
  if (name == "shift") return Condition::kShift;
  throw ConfigError("condition must be 'normal' or 'shift', got '" + name + "'");
}

std::string ToString(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kGpdp: return "gpdp";
    case PolicyKind::kGreedy: return "greedy";
    case PolicyKind::kDiffusion: return "diffusion";
  }
  return "unknown";
}

EpisodeTrace RunEpisode(const EnvParams& env, const ShiftSpec& shift, Condition condition,
                        const ActionFn& act, Rng& env_rng) {
  PointReacherEnv world(env, shift);
  Eigen::VectorXd obs = world.Reset(env_rng);
  EpisodeTrace trace;
  for (int t = 0; t < env.horizon; ++t) {
    const bool active = condition == Condition::kShift && shift.ActiveAt(t);
    const Eigen::VectorXd action = act(obs, t);
    if (action.size() != kActionDim || !action.allFinite()) {
      throw ContractError("policy returned an invalid action");
    }
    trace.observations.push_back(obs);
    trace.shift_active.push_back(active);
    const PointReacherEnv::Step step = world.Advance(action.cwiseMax(-1.0).cwiseMin(1.0), active);
    trace.rewards.push_back(step.reward);
    trace.total_return += step.reward;
    obs = step.observation;
    if (step.done) break;
  }
  return trace;
}

json ToJson(const EvalReport& report) {
  json j = {
      {"schema_version", 1},
      {"condition", ToString(report.condition)},
      {"policy", report.policy},
      {"seeds", report.seeds},
      {"returns", report.returns},
      {"mean", report.mean},
      {"max", report.max},
      {"trace_paths", report.trace_paths},
  };
  if (report.far_field) j["far_field"] = *report.far_field;
  return j;
}

EvalReport EvaluatePolicy(const EnvParams& env, const ShiftSpec& shift, Condition condition,
                          const std::vector<std::uint64_t>& seeds, const std::string& policy_name,
                          const PolicyFactory& factory, const std::string& out_dir, int workers,
                          std::vector<EpisodeTrace>* traces) {
  if (seeds.empty()) throw ConfigError("eval.seeds must not be empty");
  std::vector<EpisodeTrace> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        Rng env_rng = DeriveRng(seeds[i], 0);
        Rng policy_rng = DeriveRng(seeds[i], 1);
        const ActionFn act = factory(policy_rng);
        results[i] = RunEpisode(env, shift, condition, act, env_rng);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int threads = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(seeds.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.condition = condition;
  report.policy = policy_name;
  report.seeds = seeds;
  report.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const EpisodeTrace& tr : results) {
    report.returns.push_back(tr.total_return);
    sum += tr.total_return;
    report.max = std::max(report.max, tr.total_return);
  }
  report.mean = sum / static_cast<double>(results.size());

  if (!out_dir.empty()) {
    const std::string cond = ToString(condition);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const std::string name = "trace_" + policy_name + "_" + cond + "_seed" +
                               std::to_string(seeds[i]) + ".csv";
      const std::string path = Join(out_dir, name);
      std::string text = "t,reward,condition\n";
      char line[96];
      for (std::size_t t = 0; t < results[i].rewards.size(); ++t) {
        std::snprintf(line, sizeof(line), "%zu,%.17g,%s\n", t, results[i].rewards[t],
                      cond.c_str());
        text += line;
      }
      WriteText(path, text);
      report.trace_paths.push_back(name);
    }
  }
  if (traces != nullptr) *traces = std::move(results);
  return report;
}

json FarFieldCheck(const PolicyBundle& bundle, const Eigen::VectorXd& state, int draws,
                   int permutations, double alpha, Rng& rng) {
  const GprPosterior posterior = bundle.guidance.Posterior(state);
  const Eigen::MatrixXd states = state.transpose().replicate(draws, 1);
  const Eigen::MatrixXd guided =
      SampleActions(bundle.eps, states, bundle.schedule, {&posterior, 1}, rng);
  const Eigen::MatrixXd unguided = SampleActions(bundle.eps, states, bundle.schedule, {}, rng);
  const TestResult test = EnergyDistanceTest(guided, unguided, permutations, rng);
  const double signal2 = bundle.guidance.hyperparams().signal_variance();
  const double distance =
      bundle.guidance.MinScaledDistance(std::span<const double>(state.data(), state.size()));
  return {
      {"state", std::vector<double>(state.begin(), state.end())},
      {"min_scaled_distance", distance},
      {"posterior_mean", std::vector<double>(posterior.mean.begin(), posterior.mean.end())},
      {"posterior_variance", posterior.variance},
      {"prior_variance", signal2},
      {"draws", draws},
      {"permutations", permutations},
      {"energy_statistic", test.statistic},
      {"p_value", test.p_value},
      {"alpha", alpha},
      {"passed", test.p_value >= alpha},
  };
}

EvalReport Evaluate(const std::string& bundle_dir, const RunConfig& config, Condition condition,
                    PolicyKind kind, const std::string& out_dir) {
  config.Validate();
  const PolicyBundle bundle = LoadBundle(bundle_dir);
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output dir " + out_dir);
  }
  const ActionValueFn q = QFunction(bundle.critics);
  const int candidates = bundle.config.policy.candidates;
  PolicyFactory factory;
  switch (kind) {
    case PolicyKind::kGpdp:
      factory = [&bundle](Rng& rng) -> ActionFn {
        return [&bundle, &rng](const Eigen::VectorXd& obs, int) {
          return Act(obs, bundle.eps, bundle.schedule, bundle.guidance, rng);
        };
      };
      break;
    case PolicyKind::kGreedy:
      factory = [&bundle, &q, candidates](Rng& rng) -> ActionFn {
        return [&bundle, &q, candidates, &rng](const Eigen::VectorXd& obs, int) {
          return GreedyAct(obs, bundle.eps, bundle.schedule, q, candidates, rng);
        };
      };
      break;
    case PolicyKind::kDiffusion:
      factory = [&bundle](Rng& rng) -> ActionFn {
        return [&bundle, &rng](const Eigen::VectorXd& obs, int) {
          return SampleAction(bundle.eps, obs, bundle.schedule, nullptr, rng);
        };
      };
      break;
  }
  std::vector<EpisodeTrace> traces;
  EvalReport report = EvaluatePolicy(config.env, config.eval.shift, condition, config.eval.seeds,
                                     ToString(kind), factory, out_dir, config.eval.workers,
                                     &traces);

  if (condition == Condition::kShift && kind == PolicyKind::kGpdp) {
    // Shifted-phase state farthest (in kernel length scales) from the
    // guidance data; the first one wins ties.
    double best = -1.0;
    Eigen::VectorXd far_state;
    for (const EpisodeTrace& tr : traces) {
      for (std::size_t t = 0; t < tr.observations.size(); ++t) {
        if (!tr.shift_active[t]) continue;
        const Eigen::VectorXd& s = tr.observations[t];
        const double d = bundle.guidance.MinScaledDistance({s.data(), static_cast<size_t>(s.size())});
        if (d > best) {
          best = d;
          far_state = s;
        }
      }
    }
    if (far_state.size() > 0) {
      Rng rng = DeriveRng(config.eval.seeds.front(), 2);
      report.far_field = FarFieldCheck(bundle, far_state, config.eval.far_field_draws,
                                       config.eval.far_field_permutations,
                                       config.eval.far_field_alpha, rng);
    }
  }

  if (!out_dir.empty()) {
    const std::string name =
        "report_" + report.policy + "_" + ToString(condition) + ".json";
    WriteText(Join(out_dir, name), ToJson(report).dump(2) + "\n");
  }
  return report;
}

json Inspect(const std::string& bundle_dir) {
  if (!fs::is_directory(bundle_dir)) throw IoError("no bundle directory at " + bundle_dir);
  json out = {{"bundle", bundle_dir}};
  json stages = json::array();
  for (int stage = 0; stage < kNumStages; ++stage) {
    stages.push_back({{"stage", stage}, {"name", StageName(stage)},
                      {"done", StageDone(bundle_dir, stage)}});
  }
  out["stages"] = stages;
  const std::string config_path = Join(bundle_dir, kBundleConfig);
  if (fs::exists(config_path)) out["config"] = ReadJsonFile(config_path);
  if (fs::exists(Join(bundle_dir, kRelabelFile))) {
    BestTrajectory best;
    AlteredActionSet altered;
    RelabelFromJson(ReadJsonFile(Join(bundle_dir, kRelabelFile)), best, altered);
    long dominated = 0;
    for (Eigen::Index t = 0; t < altered.q_values.size(); ++t) {
      if (altered.q_values[t] >= altered.original_q_values[t]) ++dominated;
    }
    out["relabel"] = {
        {"episode", best.episode},
        {"total_return", best.total_return},
        {"states", best.states.rows()},
        {"candidates", altered.candidates},
        {"includes_original", altered.includes_original},
        {"mean_q_altered", altered.q_values.size() ? altered.q_values.mean() : 0.0},
        {"mean_q_original",
         altered.original_q_values.size() ? altered.original_q_values.mean() : 0.0},
        {"dominance_fraction",
         altered.q_values.size() ? double(dominated) / altered.q_values.size() : 1.0},
    };
  }
  if (fs::exists(Join(bundle_dir, kGprFile))) {
    const GprModel model = LoadGprSnapshot(Join(bundle_dir, kGprFile));
    const KernelHyperparams& hp = model.hyperparams();
    out["gpr"] = {{"points", model.num_points()},
                  {"noise_std", hp.noise_std()},
                  {"signal_std", hp.signal_std()},
                  {"length_scale", hp.length_scale()},
                  {"jitter", model.jitter()},
                  {"nll", model.NegativeLogLikelihood()}};
  }
  return out;
}

}  // namespace gpdp
