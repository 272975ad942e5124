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

#ifndef GPDP_CRITIC_H_
#define GPDP_CRITIC_H_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "gpdp/nn.h"
#include "gpdp/random.h"

namespace gpdp {

// |tau - 1(u < 0)| u^2
double ExpectileLoss(double u, double tau);

struct CriticOptions {
  double expectile = 0.7;
  double soft_update_rate = 0.005;
  double discount = 0.99;
  std::vector<int> hidden_sizes = {64, 64, 64};
  AdamOptions adam;
};

struct TransitionBatch {
  Eigen::MatrixXd states;       // B x d
  Eigen::MatrixXd actions;      // B x m
  Eigen::VectorXd rewards;      // B
  Eigen::MatrixXd next_states;  // B x d
  Eigen::VectorXd dones;        // B, 1 for terminal
};

// Q, target Q and V networks of implicit Q-learning.
struct CriticSet {
  static CriticSet Create(int state_dim, int action_dim, const CriticOptions& options, Rng& rng);

  // Q(s, a) for each row.
  Eigen::VectorXd QValues(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;
  Eigen::VectorXd TargetQValues(const Eigen::MatrixXd& states,
                                const Eigen::MatrixXd& actions) const;
  Eigen::VectorXd Values(const Eigen::MatrixXd& states) const;

  void Validate() const;

  MlpNet q_net;
  MlpNet q_target;
  MlpNet v_net;
  AdamState q_adam;
  AdamState v_adam;
  double expectile = 0.7;
  double soft_update_rate = 0.005;
  double discount = 0.99;
};

// One Adam step of V towards the tau-expectile of `q_values` at `states`.
// Returns the mean expectile loss before the step.
double FitValueStep(MlpNet& v_net, AdamState& adam, const Eigen::MatrixXd& states,
                    const Eigen::VectorXd& q_values, double tau);

// One Adam step of Q on mean (target - Q(s, a))^2. Returns the loss.
double FitQStep(MlpNet& q_net, AdamState& adam, const Eigen::MatrixXd& states,
                const Eigen::MatrixXd& actions, const Eigen::VectorXd& targets);

// u = Q_target(s, a) - V(s); target Q is held fixed.
double UpdateValue(CriticSet& critics, const Eigen::MatrixXd& states,
                   const Eigen::MatrixXd& actions);

// target = r + gamma (1 - done) V(s').
double UpdateQ(CriticSet& critics, const TransitionBatch& batch);

void SoftUpdateTarget(CriticSet& critics);

Eigen::MatrixXd ConcatColumns(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right);

}  // namespace gpdp

#endif  // GPDP_CRITIC_H_
