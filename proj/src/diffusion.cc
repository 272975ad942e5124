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

#include "gpdp/diffusion.h"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "gpdp/errors.h"

namespace gpdp {
namespace {

void CheckSteps(std::span<const int> steps, Eigen::Index rows, int max_step) {
  if (static_cast<Eigen::Index>(steps.size()) != rows) {
    throw ContractError("one diffusion step per row is required");
  }
  for (int step : steps) {
    if (step < 1 || step > max_step) {
      throw ContractError("diffusion step " + std::to_string(step) + " outside 1.." +
                          std::to_string(max_step));
    }
  }
}

const GprPosterior* GuidanceForRow(std::span<const GprPosterior> guidance, Eigen::Index row,
                                   Eigen::Index rows) {
  if (guidance.empty()) return nullptr;
  if (guidance.size() == 1) return &guidance[0];
  if (static_cast<Eigen::Index>(guidance.size()) != rows) {
    throw ContractError("guidance must be empty, shared, or one posterior per row");
  }
  return &guidance[row];
}

}  // namespace

DiffusionSchedule DiffusionSchedule::VpSde(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ContractError("diffusion needs at least one step");
  if (!(beta_min > 0.0 && beta_min <= beta_max)) {
    throw ContractError("VP-SDE requires 0 < beta_min <= beta_max");
  }
  const double n = steps;
  std::vector<double> betas(steps);
  for (int i = 1; i <= steps; ++i) {
    betas[i - 1] = -std::expm1(-beta_min / n - (beta_max - beta_min) * (2.0 * i - 1.0) /
                                                   (2.0 * n * n));
  }
  return FromBetas(std::move(betas));
}

DiffusionSchedule DiffusionSchedule::Linear(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ContractError("diffusion needs at least one step");
  if (!(beta_min > 0.0 && beta_min <= beta_max)) {
    throw ContractError("linear schedule requires 0 < beta_min <= beta_max");
  }
  std::vector<double> betas(steps);
  for (int i = 1; i <= steps; ++i) {
    const double frac = steps == 1 ? 0.0 : (i - 1.0) / (steps - 1.0);
    betas[i - 1] = (beta_min + frac * (beta_max - beta_min)) / steps;
  }
  return FromBetas(std::move(betas));
}

DiffusionSchedule DiffusionSchedule::FromBetas(std::vector<double> betas) {
  if (betas.empty()) throw ContractError("diffusion needs at least one step");
  DiffusionSchedule s;
  s.alpha_bars_.resize(betas.size());
  double product = 1.0;
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (!(betas[k] > 0.0 && betas[k] < 1.0)) {
      throw ContractError("beta^" + std::to_string(k + 1) + " = " + std::to_string(betas[k]) +
                          " is outside (0, 1)");
    }
    product *= 1.0 - betas[k];
    s.alpha_bars_[k] = product;
  }
  s.betas_ = std::move(betas);
  return s;
}

std::size_t DiffusionSchedule::Index(int step) const {
  if (step < 1 || step > steps()) {
    throw ContractError("diffusion step " + std::to_string(step) + " outside 1.." +
                        std::to_string(steps()));
  }
  return static_cast<std::size_t>(step - 1);
}

Eigen::RowVectorXd TimestepEmbedding(int step) {
  constexpr int kHalf = kTimestepEmbeddingDim / 2;
  Eigen::RowVectorXd emb(kTimestepEmbeddingDim);
  for (int k = 0; k < kHalf; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / kHalf);
    emb(k) = std::sin(step * freq);
    emb(kHalf + k) = std::cos(step * freq);
  }
  return emb;
}

EpsNet::EpsNet(MlpNet net, int state_dim, int action_dim)
    : net_(std::move(net)), state_dim_(state_dim), action_dim_(action_dim) {
  if (net_.input_size() != state_dim + action_dim + kTimestepEmbeddingDim ||
      net_.output_size() != action_dim) {
    throw ContractError("noise network shape does not match state/action dimensions");
  }
}

EpsNet EpsNet::Create(int state_dim, int action_dim, std::span<const int> hidden_sizes,
                      Rng& rng) {
  return EpsNet(MlpNet::Create(state_dim + action_dim + kTimestepEmbeddingDim, hidden_sizes,
                               action_dim, rng),
                state_dim, action_dim);
}

Eigen::MatrixXd EpsNet::BuildInput(const Eigen::MatrixXd& states,
                                   const Eigen::MatrixXd& noised_actions,
                                   std::span<const int> steps) const {
  const Eigen::Index rows = states.rows();
  if (states.cols() != state_dim_ || noised_actions.cols() != action_dim_ ||
      noised_actions.rows() != rows) {
    throw ContractError("noise network batch has wrong shape");
  }
  if (static_cast<Eigen::Index>(steps.size()) != rows) {
    throw ContractError("one diffusion step per row is required");
  }
  Eigen::MatrixXd input(rows, state_dim_ + action_dim_ + kTimestepEmbeddingDim);
  input.leftCols(state_dim_) = states;
  input.middleCols(state_dim_, action_dim_) = noised_actions;
  // Steps are usually shared across a batch; reuse the embedding.
  int cached_step = -1;
  Eigen::RowVectorXd emb;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (steps[r] != cached_step) {
      cached_step = steps[r];
      emb = TimestepEmbedding(cached_step);
    }
    input.block(r, state_dim_ + action_dim_, 1, kTimestepEmbeddingDim) = emb;
  }
  return input;
}

Eigen::MatrixXd EpsNet::PredictNoise(const Eigen::MatrixXd& states,
                                     const Eigen::MatrixXd& noised_actions,
                                     std::span<const int> steps) const {
  return net_.Forward(BuildInput(states, noised_actions, steps));
}

Eigen::VectorXd ForwardNoise(const Eigen::VectorXd& action, int step, const Eigen::VectorXd& noise,
                             const DiffusionSchedule& schedule) {
  if (action.size() != noise.size()) throw ContractError("noise and action differ in size");
  const double ab = schedule.alpha_bar(step);
  return std::sqrt(ab) * action + std::sqrt(1.0 - ab) * noise;
}

Eigen::MatrixXd ForwardNoise(const Eigen::MatrixXd& actions, std::span<const int> steps,
                             const Eigen::MatrixXd& noise, const DiffusionSchedule& schedule) {
  if (actions.rows() != noise.rows() || actions.cols() != noise.cols()) {
    throw ContractError("noise and action batches differ in shape");
  }
  CheckSteps(steps, actions.rows(), schedule.steps());
  Eigen::MatrixXd out(actions.rows(), actions.cols());
  for (Eigen::Index r = 0; r < actions.rows(); ++r) {
    const double ab = schedule.alpha_bar(steps[r]);
    out.row(r) = std::sqrt(ab) * actions.row(r) + std::sqrt(1.0 - ab) * noise.row(r);
  }
  return out;
}

EpsLossResult EpsLoss(const EpsNet& net, const Eigen::MatrixXd& states,
                      const Eigen::MatrixXd& actions, const DiffusionSchedule& schedule,
                      Rng& rng) {
  std::uniform_int_distribution<int> pick(1, schedule.steps());
  std::vector<int> steps(static_cast<std::size_t>(actions.rows()));
  for (auto& s : steps) s = pick(rng);
  const Eigen::MatrixXd noise = StandardNormal(actions.rows(), actions.cols(), rng);
  return EpsLoss(net, states, actions, steps, noise, schedule);
}

EpsLossResult EpsLoss(const EpsNet& net, const Eigen::MatrixXd& states,
                      const Eigen::MatrixXd& actions, std::span<const int> steps,
                      const Eigen::MatrixXd& noise, const DiffusionSchedule& schedule) {
  if (actions.rows() == 0) throw ContractError("empty batch");
  const Eigen::MatrixXd noised = ForwardNoise(actions, steps, noise, schedule);
  const ForwardTrace trace = net.net().ForwardWithTrace(net.BuildInput(states, noised, steps));
  const Eigen::MatrixXd residual = trace.output - noise;
  const double batch = static_cast<double>(actions.rows());
  EpsLossResult result;
  result.loss = residual.squaredNorm() / batch;
  result.gradients = net.net().Backward(trace, (2.0 / batch) * residual);
  return result;
}

double EpsLossValue(const NoiseModel& model, const Eigen::MatrixXd& states,
                    const Eigen::MatrixXd& actions, std::span<const int> steps,
                    const Eigen::MatrixXd& noise, const DiffusionSchedule& schedule) {
  if (actions.rows() == 0) throw ContractError("empty batch");
  const Eigen::MatrixXd noised = ForwardNoise(actions, steps, noise, schedule);
  const Eigen::MatrixXd predicted = model.PredictNoise(states, noised, steps);
  return (predicted - noise).squaredNorm() / static_cast<double>(actions.rows());
}

Eigen::VectorXd GuidedMean(const Eigen::VectorXd& mean, double variance,
                           const GprPosterior& guidance) {
  if (!(guidance.variance > 0.0)) {
    throw ContractError("guidance posterior variance must be positive");
  }
  if (guidance.mean.size() != mean.size()) {
    throw ContractError("guidance mean dimension does not match action dimension");
  }
  return mean - (variance / guidance.variance) * (mean - guidance.mean.transpose());
}

Eigen::VectorXd ScoreGuidedMean(const Eigen::VectorXd& mean, double variance,
                                const Eigen::VectorXd& guidance_mean,
                                const Eigen::MatrixXd& guidance_covariance) {
  if (guidance_mean.size() != mean.size() || guidance_covariance.rows() != mean.size() ||
      guidance_covariance.cols() != mean.size()) {
    throw ContractError("guidance density dimension does not match action dimension");
  }
  // grad_y log N(y | mu, C) = C^-1 (mu - y)
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(guidance_covariance);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw ContractError("guidance covariance must be positive definite");
  }
  const Eigen::VectorXd score = ldlt.solve(guidance_mean - mean);
  return mean + variance * score;
}

Eigen::MatrixXd DenoisingMean(const NoiseModel& model, const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& noised_actions, int step,
                              const DiffusionSchedule& schedule) {
  const double beta = schedule.beta(step);
  const double ab = schedule.alpha_bar(step);
  const std::vector<int> steps(static_cast<std::size_t>(states.rows()), step);
  const Eigen::MatrixXd eps = model.PredictNoise(states, noised_actions, steps);
  return (noised_actions - (beta / std::sqrt(1.0 - ab)) * eps) / std::sqrt(1.0 - beta);
}

GuidedGaussian ReverseStepDistribution(const NoiseModel& model, const Eigen::VectorXd& state,
                                       const Eigen::VectorXd& noised_action, int step,
                                       const DiffusionSchedule& schedule,
                                       const GprPosterior* guidance) {
  GuidedGaussian g;
  g.mean = DenoisingMean(model, state.transpose(), noised_action.transpose(), step, schedule)
               .row(0)
               .transpose();
  g.variance = schedule.beta(step);
  g.guided_mean = guidance ? GuidedMean(g.mean, g.variance, *guidance) : g.mean;
  return g;
}

Eigen::MatrixXd ReverseStep(const NoiseModel& model, const Eigen::MatrixXd& states,
                            const Eigen::MatrixXd& noised_actions, int step,
                            const DiffusionSchedule& schedule,
                            std::span<const GprPosterior> guidance, Rng& rng) {
  const Eigen::Index rows = states.rows();
  Eigen::MatrixXd next = DenoisingMean(model, states, noised_actions, step, schedule);
  const double beta = schedule.beta(step);
  if (!guidance.empty()) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const GprPosterior* g = GuidanceForRow(guidance, r, rows);
      next.row(r) = GuidedMean(next.row(r).transpose(), beta, *g).transpose();
    }
  }
  if (step > 1) {
    next += std::sqrt(beta) * StandardNormal(rows, next.cols(), rng);
  } else {
    next = next.cwiseMax(-1.0).cwiseMin(1.0);
  }
  return next;
}

Eigen::MatrixXd SampleActions(const NoiseModel& model, const Eigen::MatrixXd& states,
                              const DiffusionSchedule& schedule,
                              std::span<const GprPosterior> guidance, Rng& rng) {
  if (states.cols() != model.state_dim()) {
    throw ContractError("state dimension does not match noise model");
  }
  Eigen::MatrixXd a = StandardNormal(states.rows(), model.action_dim(), rng);
  for (int step = schedule.steps(); step >= 1; --step) {
    a = ReverseStep(model, states, a, step, schedule, guidance, rng);
  }
  return a;
}

Eigen::VectorXd SampleAction(const NoiseModel& model, const Eigen::VectorXd& state,
                             const DiffusionSchedule& schedule, const GprPosterior* guidance,
                             Rng& rng) {
  std::span<const GprPosterior> g;
  if (guidance) g = std::span<const GprPosterior>(guidance, 1);
  return SampleActions(model, state.transpose(), schedule, g, rng).row(0).transpose();
}

}  // namespace gpdp
