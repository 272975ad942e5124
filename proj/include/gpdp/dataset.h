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

#ifndef GPDP_DATASET_H_
#define GPDP_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "gpdp/critic.h"
#include "gpdp/env.h"
#include "gpdp/random.h"

namespace gpdp {

enum class TransitionTag { kExpert, kMedium, kShifted };

std::string ToString(TransitionTag tag);
TransitionTag TagFromString(const std::string& name);

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
  int episode = 0;
  int step = 0;
  TransitionTag tag = TransitionTag::kExpert;
};

struct DatasetConfig {
  long transitions = 100000;
  double shift_fraction = 0.1;
  std::uint64_t seed = 0;
  EnvParams env;
  ShiftSpec shift;
};

struct EpisodeSummary {
  int episode = 0;
  TransitionTag tag = TransitionTag::kExpert;
  std::size_t first = 0;  // index of the first transition
  int length = 0;
  double total_return = 0.0;
};

struct Dataset {
  std::vector<Transition> transitions;

  std::vector<EpisodeSummary> Episodes() const;
  // Throws ContractError when step indices or s'/s chaining break.
  void Validate() const;
};

struct DatasetStats {
  Eigen::VectorXd state_mean;
  Eigen::VectorXd state_std;
  double reward_mean = 0.0;
  double reward_std = 0.0;
};

DatasetStats ComputeStats(const Dataset& dataset);

// Episode tags cycle so that a `shift_fraction` share is rolled under the
// shift spec and the rest alternates expert / medium. Episodes are added
// until at least `config.transitions` rows exist.
Dataset GenerateDataset(const DatasetConfig& config);

// One episode with the given behavior; shifted episodes use the expert
// controller with the trigger drawn uniformly from [0, 2 * trigger_step].
std::vector<Transition> RolloutEpisode(const DatasetConfig& config, int episode,
                                       TransitionTag tag);

TransitionBatch SampleBatch(const Dataset& dataset, int batch_size, Rng& rng);

// JSONL with fixed field order (s, a, r, s_next, done, ep, step, tag) and
// 17 significant digits.
std::string FormatTransition(const Transition& t);
Transition ParseTransition(const std::string& line);

nlohmann::json BuildMetadata(const Dataset& dataset, const DatasetConfig& config);

inline constexpr int kDatasetSchemaVersion = 1;

// Writes <dir>/dataset.jsonl and <dir>/dataset.meta.json. The directory must exist.
void WriteDataset(const Dataset& dataset, const DatasetConfig& config, const std::string& dir);
Dataset ReadDataset(const std::string& jsonl_path);

nlohmann::json EnvParamsToJson(const EnvParams& params);
EnvParams EnvParamsFromJson(const nlohmann::json& j, EnvParams defaults = {});
nlohmann::json ShiftSpecToJson(const ShiftSpec& shift);
ShiftSpec ShiftSpecFromJson(const nlohmann::json& j, ShiftSpec defaults = {});

}  // namespace gpdp

#endif  // GPDP_DATASET_H_
