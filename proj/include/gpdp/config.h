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

#ifndef GPDP_CONFIG_H_
#define GPDP_CONFIG_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpdp/env.h"
#include "gpdp/gpr.h"

namespace gpdp {

inline constexpr int kRunConfigSchemaVersion = 1;

struct DataSection {
  std::string dir = "data";
  long transitions = 100000;
  double shift_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct ScheduleSection {
  int steps = 5;
  double beta_min = 0.1;
  double beta_max = 10.0;
};

struct CriticSection {
  double tau = 0.7;
  double eta = 0.005;
  double gamma = 0.99;
  bool normalize_rewards = false;
};

struct OptimizerSection {
  double learning_rate = 3e-4;
  int batch_size = 256;
  long critic_steps = 50000;
  long eps_steps = 50000;
  int hidden_width = 64;
  int hidden_layers = 3;
  std::uint64_t seed = 0;
  int log_every = 1;
};

struct GprSection {
  int cap = 2048;
  int restarts = 4;
  int iterations = 200;
  double learning_rate = 0.05;
  double lower_bound = 1e-4;
  double upper_bound = 1e4;
  bool standardize = true;
};

struct PolicySection {
  int candidates = 16;
  int top_k = 1;
  bool include_original = true;
};

struct EvalSection {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  ShiftSpec shift;
  int far_field_draws = 1000;
  int far_field_permutations = 199;
  double far_field_alpha = 0.01;
  int workers = 0;  // 0 = hardware concurrency
};

struct RunConfig {
  int schema_version = kRunConfigSchemaVersion;
  EnvParams env;
  DataSection data;
  ScheduleSection schedule;
  CriticSection critic;
  OptimizerSection optimizer;
  GprSection gpr;
  PolicySection policy;
  EvalSection eval;

  // Throws ConfigError naming the offending field.
  void Validate() const;
  GprFitOptions GprOptions() const;
};

nlohmann::json ToJson(const RunConfig& config);
RunConfig RunConfigFromJson(const nlohmann::json& j);

// Sets a dot-path field ("critic.tau") in a config document. The value is
// parsed as JSON when possible, otherwise taken as a string. Unknown paths
// are rejected.
void ApplyOverride(nlohmann::json& document, const std::string& path, const std::string& value);

// Defaults, then the optional JSON file, then overrides in order.
RunConfig LoadRunConfig(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace gpdp

#endif  // GPDP_CONFIG_H_
