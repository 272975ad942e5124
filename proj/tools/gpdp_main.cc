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

// Command-line front end: gen-data, train, eval, eval-shift, inspect.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "gpdp/config.h"
#include "gpdp/errors.h"
#include "gpdp/pipeline.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitTraining = 4;
constexpr int kExitBundle = 5;

using Overrides = std::vector<std::pair<std::string, std::string>>;

// "--a.b value" and "--a.b=value" pairs left over by the parser.
Overrides ParseOverrides(const std::vector<std::string>& extras) {
  Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      throw gpdp::ConfigError("unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    const std::size_t eq = key.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw gpdp::ConfigError("missing value for '" + arg + "'");
    out.emplace_back(key, extras[++i]);
  }
  return out;
}

struct EvalArgs {
  std::string bundle;
  std::string config;
  std::string out;
  std::string condition = "normal";
  std::string policy = "gpdp";
  bool unguided = false;
};

void AddEvalOptions(CLI::App* cmd, EvalArgs& args, bool with_condition) {
  cmd->add_option("--bundle", args.bundle, "Policy bundle directory")->required();
  cmd->add_option("--config", args.config, "Run config JSON (default: the bundle's)");
  cmd->add_option("--out", args.out, "Output directory (default: <bundle>/eval)");
  if (with_condition) {
    cmd->add_option("--condition", args.condition, "normal or shift")
        ->check(CLI::IsMember({"normal", "shift"}));
  }
  cmd->add_option("--policy", args.policy, "gpdp, greedy or diffusion")
      ->check(CLI::IsMember({"gpdp", "greedy", "diffusion"}));
  cmd->add_flag("--unguided", args.unguided, "Greedy-diffusion ablation (same as --policy greedy)");
  cmd->allow_extras();
}

int RunEval(const EvalArgs& args, const Overrides& overrides) {
  namespace fs = std::filesystem;
  std::string config_path = args.config;
  if (config_path.empty()) {
    config_path = (fs::path(args.bundle) / gpdp::kBundleConfig).string();
    if (!fs::exists(config_path)) {
      throw gpdp::BundleError("bundle " + args.bundle + " has no " + gpdp::kBundleConfig);
    }
  }
  const gpdp::RunConfig config = gpdp::LoadRunConfig(config_path, overrides);
  gpdp::PolicyKind kind = gpdp::PolicyKind::kGpdp;
  if (args.unguided || args.policy == "greedy") kind = gpdp::PolicyKind::kGreedy;
  if (args.policy == "diffusion") kind = gpdp::PolicyKind::kDiffusion;
  const std::string out =
      args.out.empty() ? (fs::path(args.bundle) / "eval").string() : args.out;
  const gpdp::EvalReport report = gpdp::Evaluate(
      args.bundle, config, gpdp::ConditionFromString(args.condition), kind, out);
  std::printf("policy %s, condition %s, %zu seeds: mean %.6g, max %.6g\n", report.policy.c_str(),
              gpdp::ToString(report.condition).c_str(), report.seeds.size(), report.mean,
              report.max);
  if (report.far_field) {
    std::printf("far-field check: distance %.4g, p = %.4g (%s)\n",
                (*report.far_field)["min_scaled_distance"].get<double>(),
                (*report.far_field)["p_value"].get<double>(),
                (*report.far_field)["passed"].get<bool>() ? "pass" : "fail");
  }
  std::printf("report written to %s\n", out.c_str());
  return 0;
}

int Main(int argc, char** argv) {
  CLI::App app{"Gaussian-process-guided diffusion policy toolkit"};
  app.require_subcommand(1);

  std::string gen_config;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate the offline dataset");
  gen->add_option("--config", gen_config, "Run config JSON");
  gen->allow_extras();

  std::string train_config, train_bundle;
  CLI::App* train = app.add_subcommand("train", "Train a policy bundle (resumable)");
  train->add_option("--config", train_config, "Run config JSON");
  train->add_option("--bundle", train_bundle, "Bundle output directory")->required();
  train->allow_extras();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a bundle over the configured seeds");
  AddEvalOptions(eval, eval_args, true);

  EvalArgs shift_args;
  shift_args.condition = "shift";
  CLI::App* eval_shift = app.add_subcommand("eval-shift", "eval --condition shift");
  AddEvalOptions(eval_shift, shift_args, false);

  std::string inspect_bundle;
  CLI::App* inspect = app.add_subcommand("inspect", "Print a bundle summary");
  inspect->add_option("--bundle", inspect_bundle, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      const gpdp::RunConfig config =
          gpdp::LoadRunConfig(gen_config, ParseOverrides(gen->remaining()));
      const gpdp::Dataset data = gpdp::GenerateData(config);
      std::printf("wrote %zu transitions to %s\n", data.transitions.size(),
                  gpdp::DatasetPath(config).c_str());
    } else if (train->parsed()) {
      const gpdp::RunConfig config =
          gpdp::LoadRunConfig(train_config, ParseOverrides(train->remaining()));
      gpdp::TrainOptions options;
      options.log = &std::cout;
      const gpdp::TrainSummary summary = gpdp::Train(config, train_bundle, options);
      std::printf("bundle %s: %zu stages run, %zu skipped\n", train_bundle.c_str(),
                  summary.ran.size(), summary.skipped.size());
    } else if (eval->parsed()) {
      return RunEval(eval_args, ParseOverrides(eval->remaining()));
    } else if (eval_shift->parsed()) {
      return RunEval(shift_args, ParseOverrides(eval_shift->remaining()));
    } else if (inspect->parsed()) {
      std::printf("%s\n", gpdp::Inspect(inspect_bundle).dump(2).c_str());
    }
  } catch (const gpdp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const gpdp::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const gpdp::TrainingError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return kExitTraining;
  } catch (const gpdp::BundleError& e) {
    std::fprintf(stderr, "bundle error: %s\n", e.what());
    return kExitBundle;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return Main(argc, argv); }
