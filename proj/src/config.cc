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

#include <cmath>
#include <fstream>
#include <sstream>

#include "gpdp/dataset.h"
#include "gpdp/errors.h"

namespace gpdp {
namespace {

using nlohmann::json;

void Require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + " " + what);
}

// Every key of `patch` must already exist in `base` (objects recursively).
void MergeKnownKeys(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config field '" + path + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      MergeKnownKeys(slot, it.value(), path);
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
T Get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + section + "." + key + "': " + e.what());
  }
}

}  // namespace

void RunConfig::Validate() const {
  Require(schema_version == kRunConfigSchemaVersion, "schema_version", "is not supported");
  Require(env.mass > 0.0, "env.mass", "must be positive");
  Require(env.drag >= 0.0, "env.drag", "must be non-negative");
  Require(env.dt > 0.0, "env.dt", "must be positive");
  Require(env.horizon > 0, "env.horizon", "must be positive");
  Require(env.goal_radius > 0.0, "env.goal_radius", "must be positive");
  Require(env.init_spread >= 0.0, "env.init_spread", "must be non-negative");
  Require(!data.dir.empty(), "data.dir", "must be set");
  Require(data.transitions > 0, "data.transitions", "must be positive");
  Require(data.shift_fraction >= 0.0 && data.shift_fraction < 1.0, "data.shift_fraction",
          "must lie in [0, 1)");
  Require(schedule.steps >= 1, "schedule.steps", "must be at least 1");
  Require(schedule.beta_min > 0.0 && schedule.beta_min <= schedule.beta_max,
          "schedule.beta_min", "must satisfy 0 < beta_min <= beta_max");
  Require(critic.tau > 0.0 && critic.tau < 1.0, "critic.tau", "must lie in (0, 1)");
  Require(critic.eta > 0.0 && critic.eta <= 1.0, "critic.eta", "must lie in (0, 1]");
  Require(critic.gamma >= 0.0 && critic.gamma <= 1.0, "critic.gamma", "must lie in [0, 1]");
  Require(optimizer.learning_rate > 0.0, "optimizer.learning_rate", "must be positive");
  Require(optimizer.batch_size > 0, "optimizer.batch_size", "must be positive");
  Require(optimizer.critic_steps >= 0, "optimizer.critic_steps", "must be non-negative");
  Require(optimizer.eps_steps >= 0, "optimizer.eps_steps", "must be non-negative");
  Require(optimizer.hidden_width > 0, "optimizer.hidden_width", "must be positive");
  Require(optimizer.hidden_layers >= 1, "optimizer.hidden_layers", "must be at least 1");
  Require(optimizer.log_every >= 1, "optimizer.log_every", "must be at least 1");
  Require(gpr.cap >= 2, "gpr.cap", "must be at least 2");
  Require(gpr.restarts >= 1, "gpr.restarts", "must be at least 1");
  Require(gpr.iterations >= 0, "gpr.iterations", "must be non-negative");
  Require(gpr.learning_rate > 0.0, "gpr.learning_rate", "must be positive");
  Require(gpr.lower_bound > 0.0 && gpr.lower_bound < gpr.upper_bound, "gpr.lower_bound",
          "must satisfy 0 < lower_bound < upper_bound");
  Require(policy.candidates >= 1, "policy.candidates", "must be at least 1");
  Require(policy.top_k >= 1, "policy.top_k", "must be at least 1");
  Require(!eval.seeds.empty(), "eval.seeds", "must not be empty");
  Require(eval.shift.trigger_step >= 0, "eval.shift.trigger_step", "must be non-negative");
  Require(eval.shift.actuator >= 0 && eval.shift.actuator < kActionDim, "eval.shift.actuator",
          "must index an actuator");
  Require(eval.far_field_draws >= 2, "eval.far_field_draws", "must be at least 2");
  Require(eval.far_field_permutations >= 1, "eval.far_field_permutations", "must be positive");
  Require(eval.far_field_alpha > 0.0 && eval.far_field_alpha < 1.0, "eval.far_field_alpha",
          "must lie in (0, 1)");
  Require(eval.workers >= 0, "eval.workers", "must be non-negative");
}

GprFitOptions RunConfig::GprOptions() const {
  GprFitOptions o;
  o.restarts = gpr.restarts;
  o.iterations = gpr.iterations;
  o.learning_rate = gpr.learning_rate;
  o.seed = optimizer.seed;
  o.cap = gpr.cap;
  o.log_lower = std::log(gpr.lower_bound);
  o.log_upper = std::log(gpr.upper_bound);
  o.standardize = gpr.standardize;
  return o;
}

json ToJson(const RunConfig& c) {
  return {
      {"schema_version", c.schema_version},
      {"env", EnvParamsToJson(c.env)},
      {"data",
       {{"dir", c.data.dir},
        {"transitions", c.data.transitions},
        {"shift_fraction", c.data.shift_fraction},
        {"seed", c.data.seed}}},
      {"schedule",
       {{"steps", c.schedule.steps},
        {"beta_min", c.schedule.beta_min},
        {"beta_max", c.schedule.beta_max}}},
      {"critic",
       {{"tau", c.critic.tau},
        {"eta", c.critic.eta},
        {"gamma", c.critic.gamma},
        {"normalize_rewards", c.critic.normalize_rewards}}},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"batch_size", c.optimizer.batch_size},
        {"critic_steps", c.optimizer.critic_steps},
        {"eps_steps", c.optimizer.eps_steps},
        {"hidden_width", c.optimizer.hidden_width},
        {"hidden_layers", c.optimizer.hidden_layers},
        {"seed", c.optimizer.seed},
        {"log_every", c.optimizer.log_every}}},
      {"gpr",
       {{"cap", c.gpr.cap},
        {"restarts", c.gpr.restarts},
        {"iterations", c.gpr.iterations},
        {"learning_rate", c.gpr.learning_rate},
        {"lower_bound", c.gpr.lower_bound},
        {"upper_bound", c.gpr.upper_bound},
        {"standardize", c.gpr.standardize}}},
      {"policy",
       {{"candidates", c.policy.candidates},
        {"top_k", c.policy.top_k},
        {"include_original", c.policy.include_original}}},
      {"eval",
       {{"seeds", c.eval.seeds},
        {"shift", ShiftSpecToJson(c.eval.shift)},
        {"far_field_draws", c.eval.far_field_draws},
        {"far_field_permutations", c.eval.far_field_permutations},
        {"far_field_alpha", c.eval.far_field_alpha},
        {"workers", c.eval.workers}}},
  };
}

RunConfig RunConfigFromJson(const json& j) {
  RunConfig c;
  try {
    c.schema_version = j.at("schema_version").get<int>();
    c.env = EnvParamsFromJson(j.at("env"));
    c.eval.shift = ShiftSpecFromJson(j.at("eval").at("shift"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.data.dir = Get<std::string>(j, "data", "dir");
  c.data.transitions = Get<long>(j, "data", "transitions");
  c.data.shift_fraction = Get<double>(j, "data", "shift_fraction");
  c.data.seed = Get<std::uint64_t>(j, "data", "seed");
  c.schedule.steps = Get<int>(j, "schedule", "steps");
  c.schedule.beta_min = Get<double>(j, "schedule", "beta_min");
  c.schedule.beta_max = Get<double>(j, "schedule", "beta_max");
  c.critic.tau = Get<double>(j, "critic", "tau");
  c.critic.eta = Get<double>(j, "critic", "eta");
  c.critic.gamma = Get<double>(j, "critic", "gamma");
  c.critic.normalize_rewards = Get<bool>(j, "critic", "normalize_rewards");
  c.optimizer.learning_rate = Get<double>(j, "optimizer", "learning_rate");
  c.optimizer.batch_size = Get<int>(j, "optimizer", "batch_size");
  c.optimizer.critic_steps = Get<long>(j, "optimizer", "critic_steps");
  c.optimizer.eps_steps = Get<long>(j, "optimizer", "eps_steps");
  c.optimizer.hidden_width = Get<int>(j, "optimizer", "hidden_width");
  c.optimizer.hidden_layers = Get<int>(j, "optimizer", "hidden_layers");
  c.optimizer.seed = Get<std::uint64_t>(j, "optimizer", "seed");
  c.optimizer.log_every = Get<int>(j, "optimizer", "log_every");
  c.gpr.cap = Get<int>(j, "gpr", "cap");
  c.gpr.restarts = Get<int>(j, "gpr", "restarts");
  c.gpr.iterations = Get<int>(j, "gpr", "iterations");
  c.gpr.learning_rate = Get<double>(j, "gpr", "learning_rate");
  c.gpr.lower_bound = Get<double>(j, "gpr", "lower_bound");
  c.gpr.upper_bound = Get<double>(j, "gpr", "upper_bound");
  c.gpr.standardize = Get<bool>(j, "gpr", "standardize");
  c.policy.candidates = Get<int>(j, "policy", "candidates");
  c.policy.top_k = Get<int>(j, "policy", "top_k");
  c.policy.include_original = Get<bool>(j, "policy", "include_original");
  c.eval.seeds = Get<std::vector<std::uint64_t>>(j, "eval", "seeds");
  c.eval.far_field_draws = Get<int>(j, "eval", "far_field_draws");
  c.eval.far_field_permutations = Get<int>(j, "eval", "far_field_permutations");
  c.eval.far_field_alpha = Get<double>(j, "eval", "far_field_alpha");
  c.eval.workers = Get<int>(j, "eval", "workers");
  c.Validate();
  return c;
}

void ApplyOverride(json& document, const std::string& path, const std::string& value) {
  json* node = &document;
  std::stringstream parts(path);
  std::string key;
  while (std::getline(parts, key, '.')) {
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("unknown config field '" + path + "'");
    }
    node = &(*node)[key];
  }
  if (node->is_object()) throw ConfigError("'" + path + "' names a section, not a field");
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  *node = parsed;
}

RunConfig LoadRunConfig(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& overrides) {
  json document = ToJson(RunConfig{});
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    MergeKnownKeys(document, file, "");
  }
  for (const auto& [key, value] : overrides) ApplyOverride(document, key, value);
  return RunConfigFromJson(document);
}

}  // namespace gpdp
