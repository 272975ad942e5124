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

#ifndef GPDP_POLICY_H_
#define GPDP_POLICY_H_

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "gpdp/dataset.h"
#include "gpdp/diffusion.h"
#include "gpdp/gpr.h"
#include "gpdp/random.h"

namespace gpdp {

// States and original actions of the highest-return episode(s) of D.
struct BestTrajectory {
  Eigen::MatrixXd states;   // H x d
  Eigen::MatrixXd actions;  // H x m
  double total_return = 0.0;
  int episode = -1;
  std::vector<int> episodes;  // all concatenated episodes, best first
};

// Highest non-discounted return wins, ties go to the lower episode id. With
// top_k > 1 the next best episodes are appended; the result is truncated
// to `cap` rows.
BestTrajectory SelectBestTrajectory(const Dataset& dataset, int cap, int top_k = 1);

// Q(s, a) for every row of (states, actions).
using ActionValueFn =
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::MatrixXd&)>;

struct AlteredActionSet {
  Eigen::MatrixXd actions;            // H x m, greedy action per step
  Eigen::VectorXd q_values;           // Q of the chosen actions
  Eigen::VectorXd original_q_values;  // Q of the dataset actions
  std::vector<int> chosen;            // candidate index; M means the original action
  int candidates = 0;                 // M
  bool includes_original = false;
};

struct RelabelOptions {
  int candidates = 16;
  // Also score the dataset action as candidate M.
  bool include_original = true;
};

// For each best-trajectory state, draws M unguided diffusion samples and
// keeps the one with the highest Q (lowest index on ties).
AlteredActionSet Relabel(const BestTrajectory& trajectory, const NoiseModel& eps,
                         const DiffusionSchedule& schedule, const ActionValueFn& q,
                         const RelabelOptions& options, Rng& rng);

KernelHyperparams DefaultGuidanceInit(const Eigen::MatrixXd& actions);

GprModel BuildGuidance(const BestTrajectory& trajectory, const AlteredActionSet& altered,
                       const KernelHyperparams& init, const GprFitOptions& options);

// One GPR query at `state`, then the guided reverse chain.
Eigen::VectorXd Act(const Eigen::VectorXd& state, const NoiseModel& eps,
                    const DiffusionSchedule& schedule, const GprModel& guidance, Rng& rng);

// Greedy-diffusion ablation: argmax-Q over `candidates` unguided samples.
Eigen::VectorXd GreedyAct(const Eigen::VectorXd& state, const NoiseModel& eps,
                          const DiffusionSchedule& schedule, const ActionValueFn& q,
                          int candidates, Rng& rng);

}  // namespace gpdp

#endif  // GPDP_POLICY_H_
