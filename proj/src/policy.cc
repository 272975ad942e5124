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

#include "gpdp/policy.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpdp/errors.h"

namespace gpdp {
namespace {

int ArgmaxLowestIndex(const Eigen::VectorXd& values, Eigen::Index begin, Eigen::Index count) {
  int best = 0;
  for (Eigen::Index l = 1; l < count; ++l) {
    if (values(begin + l) > values(begin + best)) best = static_cast<int>(l);
  }
  return best;
}

}  // namespace

BestTrajectory SelectBestTrajectory(const Dataset& dataset, int cap, int top_k) {
  if (dataset.transitions.empty()) throw ContractError("cannot select from an empty dataset");
  if (cap < 1 || top_k < 1) throw ContractError("cap and top_k must be positive");
  auto episodes = dataset.Episodes();
  std::stable_sort(episodes.begin(), episodes.end(), [](const auto& a, const auto& b) {
    if (a.total_return != b.total_return) return a.total_return > b.total_return;
    return a.episode < b.episode;
  });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), episodes.size());
  std::size_t rows = 0;
  for (std::size_t e = 0; e < k; ++e) rows += static_cast<std::size_t>(episodes[e].length);
  rows = std::min<std::size_t>(rows, static_cast<std::size_t>(cap));

  const auto& first = dataset.transitions.front();
  BestTrajectory best;
  best.states.resize(static_cast<Eigen::Index>(rows), first.state.size());
  best.actions.resize(static_cast<Eigen::Index>(rows), first.action.size());
  best.total_return = episodes.front().total_return;
  best.episode = episodes.front().episode;
  std::size_t row = 0;
  for (std::size_t e = 0; e < k && row < rows; ++e) {
    best.episodes.push_back(episodes[e].episode);
    for (int s = 0; s < episodes[e].length && row < rows; ++s, ++row) {
      const auto& t = dataset.transitions[episodes[e].first + static_cast<std::size_t>(s)];
      best.states.row(static_cast<Eigen::Index>(row)) = t.state.transpose();
      best.actions.row(static_cast<Eigen::Index>(row)) = t.action.transpose();
    }
  }
  return best;
}

AlteredActionSet Relabel(const BestTrajectory& trajectory, const NoiseModel& eps,
                         const DiffusionSchedule& schedule, const ActionValueFn& q,
                         const RelabelOptions& options, Rng& rng) {
  if (options.candidates < 1) throw ContractError("relabel needs at least one candidate");
  const Eigen::Index h = trajectory.states.rows();
  const Eigen::Index m = trajectory.actions.cols();
  const Eigen::Index samples = options.candidates;
  const Eigen::Index per_state = samples + (options.include_original ? 1 : 0);

  // Row t * M + l holds candidate l for state t.
  Eigen::MatrixXd repeated(h * samples, trajectory.states.cols());
  for (Eigen::Index t = 0; t < h; ++t) {
    repeated.middleRows(t * samples, samples).rowwise() = trajectory.states.row(t);
  }
  const Eigen::MatrixXd sampled = SampleActions(eps, repeated, schedule, {}, rng);

  Eigen::MatrixXd cand_states(h * per_state, trajectory.states.cols());
  Eigen::MatrixXd cand_actions(h * per_state, m);
  for (Eigen::Index t = 0; t < h; ++t) {
    cand_states.middleRows(t * per_state, per_state).rowwise() = trajectory.states.row(t);
    cand_actions.middleRows(t * per_state, samples) = sampled.middleRows(t * samples, samples);
    if (options.include_original) {
      cand_actions.row(t * per_state + samples) = trajectory.actions.row(t);
    }
  }
  const Eigen::VectorXd values = q(cand_states, cand_actions);
  if (values.size() != h * per_state) throw ContractError("Q function returned wrong size");

  AlteredActionSet out;
  out.candidates = options.candidates;
  out.includes_original = options.include_original;
  out.actions.resize(h, m);
  out.q_values.resize(h);
  out.chosen.resize(static_cast<std::size_t>(h));
  for (Eigen::Index t = 0; t < h; ++t) {
    const int best = ArgmaxLowestIndex(values, t * per_state, per_state);
    out.chosen[static_cast<std::size_t>(t)] = best;
    out.actions.row(t) = cand_actions.row(t * per_state + best);
    out.q_values(t) = values(t * per_state + best);
  }
  out.original_q_values = options.include_original
                              ? Eigen::VectorXd(values(Eigen::seqN(samples, h, per_state)))
                              : q(trajectory.states, trajectory.actions);
  return out;
}

KernelHyperparams DefaultGuidanceInit(const Eigen::MatrixXd& actions) {
  const Eigen::RowVectorXd mean = actions.colwise().mean();
  const double var = (actions.rowwise() - mean).squaredNorm() /
                     static_cast<double>(std::max<Eigen::Index>(1, actions.size()));
  return KernelHyperparams::FromValues(0.1, std::max(std::sqrt(var), 0.1), 1.0);
}

GprModel BuildGuidance(const BestTrajectory& trajectory, const AlteredActionSet& altered,
                       const KernelHyperparams& init, const GprFitOptions& options) {
  if (trajectory.states.rows() != altered.actions.rows()) {
    throw ContractError("altered action count does not match trajectory length");
  }
  return FitGpr(trajectory.states, altered.actions, init, options);
}

Eigen::VectorXd Act(const Eigen::VectorXd& state, const NoiseModel& eps,
                    const DiffusionSchedule& schedule, const GprModel& guidance, Rng& rng) {
  const GprPosterior posterior = guidance.Posterior(state);
  return SampleAction(eps, state, schedule, &posterior, rng);
}

Eigen::VectorXd GreedyAct(const Eigen::VectorXd& state, const NoiseModel& eps,
                          const DiffusionSchedule& schedule, const ActionValueFn& q,
                          int candidates, Rng& rng) {
  if (candidates < 1) throw ContractError("greedy policy needs at least one candidate");
  const Eigen::MatrixXd states = state.transpose().replicate(candidates, 1);
  const Eigen::MatrixXd actions = SampleActions(eps, states, schedule, {}, rng);
  const Eigen::VectorXd values = q(states, actions);
  return actions.row(ArgmaxLowestIndex(values, 0, candidates)).transpose();
}

}  // namespace gpdp
