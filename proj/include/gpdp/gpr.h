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

#ifndef GPDP_GPR_H_
#define GPDP_GPR_H_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Core>

namespace gpdp {

// Squared-exponential kernel hyperparameters, stored as logs so the
// optimizer works on an unconstrained space.
struct KernelHyperparams {
  double log_noise = 0.0;   // sigma_n, action units
  double log_signal = 0.0;  // sigma_p, action units
  double log_length = 0.0;  // length-scale, standardized state units

  static KernelHyperparams FromValues(double noise_std, double signal_std,
                                      double length_scale);

  double noise_std() const { return std::exp(log_noise); }
  double signal_std() const { return std::exp(log_signal); }
  double length_scale() const { return std::exp(log_length); }
  double noise_variance() const { return std::exp(2.0 * log_noise); }
  double signal_variance() const { return std::exp(2.0 * log_signal); }
};

// sigma_p^2 * exp(-|s1 - s2|^2 / (2 l^2)).
double SeKernel(std::span<const double> s1, std::span<const double> s2,
                const KernelHyperparams& hp);

// Per-column affine map applied to states before kernel evaluation.
struct Standardization {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardization Identity(int dim);
  // Column mean and population std; near-constant columns keep scale 1.
  static Standardization FromColumns(const Eigen::MatrixXd& states);

  Eigen::MatrixXd Apply(const Eigen::MatrixXd& states) const;
  Eigen::RowVectorXd Apply(std::span<const double> state) const;
};

struct GprPosterior {
  Eigen::RowVectorXd mean;  // 1 x m
  double variance = 0.0;    // shared by all m outputs
};

struct GprFitOptions {
  int restarts = 4;
  int iterations = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  int cap = 2048;
  double log_lower = std::log(1e-4);
  double log_upper = std::log(1e4);
  bool standardize = true;
  // Half-width of the uniform perturbation applied to log-params for
  // restarts after the first.
  double restart_spread = 1.0;
};

// Negative log marginal likelihood summed over the action columns, and its
// gradient w.r.t. (log_noise, log_signal, log_length).
struct NllEvaluation {
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  double jitter = 0.0;
};

// `states` must already be in kernel coordinates (standardized).
// Throws FitError when the kernel matrix cannot be factorized.
NllEvaluation EvaluateNll(const Eigen::MatrixXd& states,
                          const Eigen::MatrixXd& actions,
                          const KernelHyperparams& hp);

// Exact GP regression with one SE kernel shared by all action columns.
// Immutable after construction; queries are thread-safe.
class GprModel {
 public:
  GprModel() = default;

  // Factorizes K_SS + sigma_n^2 I at fixed hyperparameters (no fitting).
  static GprModel Build(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                        const KernelHyperparams& hp, bool standardize = true,
                        int cap = 2048);

  // Reassembles a model from stored parts without refactorizing.
  static GprModel FromParts(Eigen::MatrixXd states, Eigen::MatrixXd actions,
                            KernelHyperparams hp, Standardization standardization,
                            Eigen::MatrixXd cholesky, Eigen::MatrixXd alpha,
                            double jitter);

  GprPosterior Posterior(std::span<const double> state) const;
  GprPosterior Posterior(const Eigen::VectorXd& state) const {
    return Posterior(std::span<const double>(state.data(), state.size()));
  }

  // Smallest distance to a training row, in length-scales of kernel space.
  double MinScaledDistance(std::span<const double> state) const;

  double NegativeLogLikelihood() const;

  int num_points() const { return static_cast<int>(states_.rows()); }
  int state_dim() const { return static_cast<int>(states_.cols()); }
  int action_dim() const { return static_cast<int>(actions_.cols()); }

  const Eigen::MatrixXd& states() const { return states_; }
  const Eigen::MatrixXd& kernel_states() const { return kernel_states_; }
  const Eigen::MatrixXd& actions() const { return actions_; }
  const KernelHyperparams& hyperparams() const { return hp_; }
  const Standardization& standardization() const { return standardization_; }
  const Eigen::MatrixXd& cholesky() const { return cholesky_; }
  const Eigen::MatrixXd& alpha() const { return alpha_; }
  double jitter() const { return jitter_; }

 private:
  Eigen::MatrixXd states_;         // raw H x d
  Eigen::MatrixXd kernel_states_;  // standardized H x d
  Eigen::MatrixXd actions_;        // H x m
  KernelHyperparams hp_;
  Standardization standardization_;
  Eigen::MatrixXd cholesky_;  // lower factor of K_SS + (sigma_n^2 + jitter) I
  Eigen::MatrixXd alpha_;     // (K_SS + sigma_n^2 I)^-1 A
  double jitter_ = 0.0;
};

// Multi-start minimization of the negative log marginal likelihood.
GprModel FitGpr(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                const KernelHyperparams& init, const GprFitOptions& options = {});

// Snapshot: "GPDP", u32 version, u32 header length, JSON header
// (d, m, H, hyperparameters, standardization, jitter), then f64 payload
// S, A, cholesky, alpha, all row-major little-endian.
inline constexpr std::uint32_t kGprSnapshotVersion = 1;

std::string SerializeGpr(const GprModel& model);
GprModel DeserializeGpr(const std::string& bytes);
void SaveGprSnapshot(const GprModel& model, const std::string& path);
GprModel LoadGprSnapshot(const std::string& path);

}  // namespace gpdp

#endif  // GPDP_GPR_H_
