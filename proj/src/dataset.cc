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

#include "gpdp/dataset.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gpdp/errors.h"

namespace gpdp {
namespace {

void AppendNumber(std::string& out, double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  out += buf;
}

void AppendVector(std::string& out, const Eigen::VectorXd& v) {
  out += '[';
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k > 0) out += ',';
    AppendNumber(out, v(k));
  }
  out += ']';
}

Eigen::VectorXd VectorFromJson(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<double> ToStd(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Episode k is shifted when floor((k+1) f) > floor(k f); the others
// alternate expert / medium in order of appearance.
TransitionTag TagOfEpisode(int k, double shift_fraction) {
  const double before = std::floor(k * shift_fraction);
  if (std::floor((k + 1) * shift_fraction) > before) return TransitionTag::kShifted;
  const long regular_before = k - static_cast<long>(before);
  return regular_before % 2 == 0 ? TransitionTag::kExpert : TransitionTag::kMedium;
}

}  // namespace

std::string ToString(TransitionTag tag) {
  switch (tag) {
    case TransitionTag::kExpert: return "expert";
    case TransitionTag::kMedium: return "medium";
    case TransitionTag::kShifted: return "shifted";
  }
  return "expert";
}

TransitionTag TagFromString(const std::string& name) {
  if (name == "expert") return TransitionTag::kExpert;
  if (name == "medium") return TransitionTag::kMedium;
  if (name == "shifted") return TransitionTag::kShifted;
  throw IoError("unknown transition tag '" + name + "'");
}

std::vector<EpisodeSummary> Dataset::Episodes() const {
  std::vector<EpisodeSummary> out;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    if (out.empty() || out.back().episode != t.episode) {
      out.push_back({t.episode, t.tag, i, 0, 0.0});
    }
    ++out.back().length;
    out.back().total_return += t.reward;
  }
  return out;
}

void Dataset::Validate() const {
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    const bool starts_episode = i == 0 || transitions[i - 1].episode != t.episode;
    if (starts_episode) {
      if (t.step != 0) throw ContractError("episode " + std::to_string(t.episode) +
                                           " does not start at step 0");
      continue;
    }
    const auto& prev = transitions[i - 1];
    if (t.step != prev.step + 1) {
      throw ContractError("non-consecutive steps in episode " + std::to_string(t.episode));
    }
    if (prev.done) {
      throw ContractError("transition after terminal in episode " + std::to_string(t.episode));
    }
    if (prev.next_state != t.state) {
      throw ContractError("s' of step " + std::to_string(prev.step) +
                          " differs from s of the next step in episode " +
                          std::to_string(t.episode));
    }
  }
}

DatasetStats ComputeStats(const Dataset& dataset) {
  if (dataset.transitions.empty()) throw ContractError("empty dataset");
  const Eigen::Index d = dataset.transitions.front().state.size();
  const double n = static_cast<double>(dataset.transitions.size());
  DatasetStats s;
  s.state_mean = Eigen::VectorXd::Zero(d);
  for (const auto& t : dataset.transitions) {
    s.state_mean += t.state;
    s.reward_mean += t.reward;
  }
  s.state_mean /= n;
  s.reward_mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  double reward_var = 0.0;
  for (const auto& t : dataset.transitions) {
    var += (t.state - s.state_mean).cwiseAbs2();
    reward_var += (t.reward - s.reward_mean) * (t.reward - s.reward_mean);
  }
  s.state_std = (var / n).cwiseSqrt();
  s.reward_std = std::sqrt(reward_var / n);
  return s;
}

std::vector<Transition> RolloutEpisode(const DatasetConfig& config, int episode,
                                       TransitionTag tag) {
  Rng rng = DeriveRng(config.seed, static_cast<std::uint64_t>(episode));
  ShiftSpec shift = config.shift;
  if (tag == TransitionTag::kShifted) {
    std::uniform_int_distribution<int> trigger(0, 2 * config.shift.trigger_step);
    shift.trigger_step = trigger(rng);
  }
  const BehaviorPolicy behavior = BehaviorPolicy::ForGrade(
      tag == TransitionTag::kMedium ? BehaviorGrade::kMedium : BehaviorGrade::kExpert);

  PointReacherEnv env(config.env, shift);
  Eigen::VectorXd obs = env.Reset(rng);
  std::vector<Transition> out;
  for (int t = 0;; ++t) {
    const Eigen::Vector2d action = behavior.Act(obs, rng);
    const bool active = tag == TransitionTag::kShifted && shift.ActiveAt(t);
    const auto step = env.Advance(action, active);
    out.push_back({obs, action, step.reward, step.observation, step.done, episode, t, tag});
    obs = step.observation;
    if (step.done) break;
  }
  return out;
}

Dataset GenerateDataset(const DatasetConfig& config) {
  if (config.transitions <= 0) throw ConfigError("dataset size must be positive");
  if (!(config.shift_fraction >= 0.0 && config.shift_fraction < 1.0)) {
    throw ConfigError("shift fraction must lie in [0, 1)");
  }
  config.shift.Validate();
  Dataset dataset;
  for (int episode = 0; static_cast<long>(dataset.transitions.size()) < config.transitions;
       ++episode) {
    auto rows = RolloutEpisode(config, episode, TagOfEpisode(episode, config.shift_fraction));
    dataset.transitions.insert(dataset.transitions.end(), std::make_move_iterator(rows.begin()),
                               std::make_move_iterator(rows.end()));
  }
  return dataset;
}

TransitionBatch SampleBatch(const Dataset& dataset, int batch_size, Rng& rng) {
  if (dataset.transitions.empty() || batch_size <= 0) {
    throw ContractError("cannot sample from an empty dataset");
  }
  const auto& first = dataset.transitions.front();
  const Eigen::Index d = first.state.size();
  const Eigen::Index m = first.action.size();
  TransitionBatch b;
  b.states.resize(batch_size, d);
  b.actions.resize(batch_size, m);
  b.rewards.resize(batch_size);
  b.next_states.resize(batch_size, d);
  b.dones.resize(batch_size);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.transitions.size() - 1);
  for (int r = 0; r < batch_size; ++r) {
    const auto& t = dataset.transitions[pick(rng)];
    b.states.row(r) = t.state.transpose();
    b.actions.row(r) = t.action.transpose();
    b.rewards(r) = t.reward;
    b.next_states.row(r) = t.next_state.transpose();
    b.dones(r) = t.done ? 1.0 : 0.0;
  }
  return b;
}

std::string FormatTransition(const Transition& t) {
  std::string out = "{\"s\":";
  AppendVector(out, t.state);
  out += ",\"a\":";
  AppendVector(out, t.action);
  out += ",\"r\":";
  AppendNumber(out, t.reward);
  out += ",\"s_next\":";
  AppendVector(out, t.next_state);
  out += ",\"done\":";
  out += t.done ? "true" : "false";
  out += ",\"ep\":" + std::to_string(t.episode);
  out += ",\"step\":" + std::to_string(t.step);
  out += ",\"tag\":\"" + ToString(t.tag) + "\"}";
  return out;
}

Transition ParseTransition(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Transition t;
    t.state = VectorFromJson(j.at("s"));
    t.action = VectorFromJson(j.at("a"));
    t.reward = j.at("r").get<double>();
    t.next_state = VectorFromJson(j.at("s_next"));
    t.done = j.at("done").get<bool>();
    t.episode = j.at("ep").get<int>();
    t.step = j.at("step").get<int>();
    t.tag = TagFromString(j.at("tag").get<std::string>());
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed transition line: ") + e.what());
  }
}

nlohmann::json EnvParamsToJson(const EnvParams& p) {
  return {{"mass", p.mass},
          {"drag", p.drag},
          {"dt", p.dt},
          {"horizon", p.horizon},
          {"goal", {p.goal(0), p.goal(1)}},
          {"goal_radius", p.goal_radius},
          {"goal_bonus", p.goal_bonus},
          {"init_spread", p.init_spread}};
}

EnvParams EnvParamsFromJson(const nlohmann::json& j, EnvParams p) {
  p.mass = j.value("mass", p.mass);
  p.drag = j.value("drag", p.drag);
  p.dt = j.value("dt", p.dt);
  p.horizon = j.value("horizon", p.horizon);
  if (j.contains("goal")) {
    const auto g = j.at("goal").get<std::vector<double>>();
    if (g.size() != 2) throw ConfigError("env.goal must have two entries");
    p.goal = Eigen::Vector2d(g[0], g[1]);
  }
  p.goal_radius = j.value("goal_radius", p.goal_radius);
  p.goal_bonus = j.value("goal_bonus", p.goal_bonus);
  p.init_spread = j.value("init_spread", p.init_spread);
  return p;
}

nlohmann::json ShiftSpecToJson(const ShiftSpec& s) {
  return {{"trigger_step", s.trigger_step},
          {"actuator", s.actuator},
          {"mode", ToString(s.mode)},
          {"duration", s.duration}};
}

ShiftSpec ShiftSpecFromJson(const nlohmann::json& j, ShiftSpec s) {
  s.trigger_step = j.value("trigger_step", s.trigger_step);
  s.actuator = j.value("actuator", s.actuator);
  if (j.contains("mode")) s.mode = ShiftModeFromString(j.at("mode").get<std::string>());
  s.duration = j.value("duration", s.duration);
  return s;
}

nlohmann::json BuildMetadata(const Dataset& dataset, const DatasetConfig& config) {
  const DatasetStats stats = ComputeStats(dataset);
  nlohmann::json counts = nlohmann::json::object();
  for (auto tag : {TransitionTag::kExpert, TransitionTag::kMedium, TransitionTag::kShifted}) {
    counts[ToString(tag)] = {{"episodes", 0}, {"transitions", 0}};
  }
  const auto episodes = dataset.Episodes();
  for (const auto& e : episodes) {
    auto& c = counts[ToString(e.tag)];
    c["episodes"] = c["episodes"].get<int>() + 1;
    c["transitions"] = c["transitions"].get<long>() + e.length;
  }
  return {{"schema_version", kDatasetSchemaVersion},
          {"seed", config.seed},
          {"requested_transitions", config.transitions},
          {"shift_fraction", config.shift_fraction},
          {"env", EnvParamsToJson(config.env)},
          {"shift", ShiftSpecToJson(config.shift)},
          {"n_transitions", dataset.transitions.size()},
          {"n_episodes", episodes.size()},
          {"counts", counts},
          {"state_mean", ToStd(stats.state_mean)},
          {"state_std", ToStd(stats.state_std)},
          {"reward_mean", stats.reward_mean},
          {"reward_std", stats.reward_std}};
}

void WriteDataset(const Dataset& dataset, const DatasetConfig& config, const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("output directory '" + dir + "' does not exist");
  const std::string data_path = (fs::path(dir) / "dataset.jsonl").string();
  const std::string meta_path = (fs::path(dir) / "dataset.meta.json").string();
  {
    std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + data_path + "' for writing");
    for (const auto& t : dataset.transitions) out << FormatTransition(t) << '\n';
    if (!out) throw IoError("failed writing '" + data_path + "'");
  }
  std::ofstream meta(meta_path, std::ios::binary | std::ios::trunc);
  if (!meta) throw IoError("cannot open '" + meta_path + "' for writing");
  meta << BuildMetadata(dataset, config).dump(2) << '\n';
  if (!meta) throw IoError("failed writing '" + meta_path + "'");
}

Dataset ReadDataset(const std::string& jsonl_path) {
  std::ifstream in(jsonl_path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + jsonl_path + "'");
  Dataset dataset;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    dataset.transitions.push_back(ParseTransition(line));
  }
  if (dataset.transitions.empty()) throw IoError("dataset '" + jsonl_path + "' is empty");
  return dataset;
}

}  // namespace gpdp
