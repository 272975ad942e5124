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

#ifndef GPDP_DIFFUSION_H_
#define GPDP_DIFFUSION_H_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "gpdp/gpr.h"
#include "gpdp/nn.h"
#include "gpdp/random.h"

namespace gpdp {

// Per-step rates beta^i and cumulative products alpha_bar^i, i = 1..N.
class DiffusionSchedule {
 public:
  DiffusionSchedule() = default;

  // Discretized VP-SDE:
  //   beta^i = 1 - exp(-beta_min/N - (beta_max - beta_min)(2i - 1)/(2N^2)).
  static DiffusionSchedule VpSde(int steps, double beta_min, double beta_max);

  // beta^i = (beta_min + (i-1)/(N-1) (beta_max - beta_min)) / N, or
  // beta_min / N for N = 1. Rejects parameters that push any beta^i to 1.
  static DiffusionSchedule Linear(int steps, double beta_min, double beta_max);

  static DiffusionSchedule FromBetas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int step) const { return betas_.at(Index(step)); }
  double alpha_bar(int step) const { return alpha_bars_.at(Index(step)); }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  std::size_t Index(int step) const;

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

inline DiffusionSchedule MakeSchedule(int steps, double beta_min, double beta_max) {
  return DiffusionSchedule::VpSde(steps, beta_min, beta_max);
}

inline constexpr int kTimestepEmbeddingDim = 16;

// Sinusoidal features of the diffusion step index.
Eigen::RowVectorXd TimestepEmbedding(int step);

// Anything that predicts the injected noise from (state, noised action, step).
class NoiseModel {
 public:
  virtual ~NoiseModel() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Eigen::MatrixXd PredictNoise(const Eigen::MatrixXd& states,
                                       const Eigen::MatrixXd& noised_actions,
                                       std::span<const int> steps) const = 0;
};

// MLP over [state, noised action, embedding(step)] -> noise estimate.
class EpsNet : public NoiseModel {
 public:
  EpsNet() = default;
  EpsNet(MlpNet net, int state_dim, int action_dim);

  static EpsNet Create(int state_dim, int action_dim, std::span<const int> hidden_sizes,
                       Rng& rng);

  int state_dim() const override { return state_dim_; }
  int action_dim() const override { return action_dim_; }

  Eigen::MatrixXd BuildInput(const Eigen::MatrixXd& states, const Eigen::MatrixXd& noised_actions,
                             std::span<const int> steps) const;
  Eigen::MatrixXd PredictNoise(const Eigen::MatrixXd& states, const Eigen::MatrixXd& noised_actions,
                               std::span<const int> steps) const override;

  const MlpNet& net() const { return net_; }
  MlpNet& mutable_net() { return net_; }

 private:
  MlpNet net_;
  int state_dim_ = 0;
  int action_dim_ = 0;
};

// sqrt(alpha_bar^i) a0 + sqrt(1 - alpha_bar^i) eps.
Eigen::VectorXd ForwardNoise(const Eigen::VectorXd& action, int step, const Eigen::VectorXd& noise,
                             const DiffusionSchedule& schedule);
// Row-wise variant; steps[r] applies to row r.
Eigen::MatrixXd ForwardNoise(const Eigen::MatrixXd& actions, std::span<const int> steps,
                             const Eigen::MatrixXd& noise, const DiffusionSchedule& schedule);

struct EpsLossResult {
  double loss = 0.0;
  MlpGradients gradients;
};

// Mean over the batch of |eps - eps_theta(s, a^i, i)|^2 with i ~ U{1..N}
// and eps ~ N(0, I) drawn from `rng`.
EpsLossResult EpsLoss(const EpsNet& net, const Eigen::MatrixXd& states,
                      const Eigen::MatrixXd& actions, const DiffusionSchedule& schedule, Rng& rng);
// Same with caller-supplied steps and noise.
EpsLossResult EpsLoss(const EpsNet& net, const Eigen::MatrixXd& states,
                      const Eigen::MatrixXd& actions, std::span<const int> steps,
                      const Eigen::MatrixXd& noise, const DiffusionSchedule& schedule);
// Loss only, for arbitrary noise models.
double EpsLossValue(const NoiseModel& model, const Eigen::MatrixXd& states,
                    const Eigen::MatrixXd& actions, std::span<const int> steps,
                    const Eigen::MatrixXd& noise, const DiffusionSchedule& schedule);

// One reverse-step Gaussian: mean mu_theta, isotropic variance beta^i, and
// the guided mean (equal to mean when no guidance is applied).
struct GuidedGaussian {
  Eigen::VectorXd mean;
  double variance = 0.0;
  Eigen::VectorXd guided_mean;
};

// mu_theta - Sigma_theta Sigma_omega^-1 (mu_theta - mu_omega), with both
// covariances isotropic. Throws ContractError if the posterior variance is
// not positive.
Eigen::VectorXd GuidedMean(const Eigen::VectorXd& mean, double variance,
                           const GprPosterior& guidance);

// mu_theta + Sigma_theta * grad_y log N(y | mu_omega, cov_omega) at y = mu_theta,
// for a full guidance covariance.
Eigen::VectorXd ScoreGuidedMean(const Eigen::VectorXd& mean, double variance,
                                const Eigen::VectorXd& guidance_mean,
                                const Eigen::MatrixXd& guidance_covariance);

// Rows of mu_theta(s, a^i, i) =
//   (a^i - beta^i / sqrt(1 - alpha_bar^i) eps_theta) / sqrt(1 - beta^i).
Eigen::MatrixXd DenoisingMean(const NoiseModel& model, const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& noised_actions, int step,
                              const DiffusionSchedule& schedule);

GuidedGaussian ReverseStepDistribution(const NoiseModel& model, const Eigen::VectorXd& state,
                                       const Eigen::VectorXd& noised_action, int step,
                                       const DiffusionSchedule& schedule,
                                       const GprPosterior* guidance);

// Samples a^{i-1} for every row. `guidance` is empty (unguided), one
// posterior shared by all rows, or one posterior per row. Step 1 adds no
// noise and clips the result to [-1, 1].
Eigen::MatrixXd ReverseStep(const NoiseModel& model, const Eigen::MatrixXd& states,
                            const Eigen::MatrixXd& noised_actions, int step,
                            const DiffusionSchedule& schedule,
                            std::span<const GprPosterior> guidance, Rng& rng);

// Full reverse chain from a^N ~ N(0, I), one action per state row.
Eigen::MatrixXd SampleActions(const NoiseModel& model, const Eigen::MatrixXd& states,
                              const DiffusionSchedule& schedule,
                              std::span<const GprPosterior> guidance, Rng& rng);

Eigen::VectorXd SampleAction(const NoiseModel& model, const Eigen::VectorXd& state,
                             const DiffusionSchedule& schedule, const GprPosterior* guidance,
                             Rng& rng);

}  // namespace gpdp

#endif  // GPDP_DIFFUSION_H_
