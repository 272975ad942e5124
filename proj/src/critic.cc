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

#include "gpdp/critic.h"

#include "gpdp/errors.h"

namespace gpdp {

double ExpectileLoss(double u, double tau) {
  const double weight = u < 0.0 ? 1.0 - tau : tau;
  return weight * u * u;
}

Eigen::MatrixXd ConcatColumns(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right) {
  if (left.rows() != right.rows()) throw ContractError("row counts differ");
  Eigen::MatrixXd out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

CriticSet CriticSet::Create(int state_dim, int action_dim, const CriticOptions& options,
                            Rng& rng) {
  CriticSet c;
  c.q_net = MlpNet::Create(state_dim + action_dim, options.hidden_sizes, 1, rng);
  c.q_target = c.q_net;
  c.v_net = MlpNet::Create(state_dim, options.hidden_sizes, 1, rng);
  c.q_adam = AdamState(c.q_net, options.adam);
  c.v_adam = AdamState(c.v_net, options.adam);
  c.expectile = options.expectile;
  c.soft_update_rate = options.soft_update_rate;
  c.discount = options.discount;
  c.Validate();
  return c;
}

void CriticSet::Validate() const {
  if (!(expectile > 0.0 && expectile < 1.0)) throw ContractError("expectile must lie in (0, 1)");
  if (!(soft_update_rate > 0.0 && soft_update_rate <= 1.0)) {
    throw ContractError("soft update rate must lie in (0, 1]");
  }
  if (!(discount >= 0.0 && discount <= 1.0)) throw ContractError("discount must lie in [0, 1]");
  if (q_net.layers().size() != q_target.layers().size()) {
    throw ContractError("target Q network differs in depth from Q network");
  }
  for (std::size_t k = 0; k < q_net.layers().size(); ++k) {
    if (q_net.layers()[k].weight.rows() != q_target.layers()[k].weight.rows() ||
        q_net.layers()[k].weight.cols() != q_target.layers()[k].weight.cols()) {
      throw ContractError("target Q network differs in shape from Q network");
    }
  }
}

Eigen::VectorXd CriticSet::QValues(const Eigen::MatrixXd& states,
                                   const Eigen::MatrixXd& actions) const {
  return q_net.Forward(ConcatColumns(states, actions)).col(0);
}

Eigen::VectorXd CriticSet::TargetQValues(const Eigen::MatrixXd& states,
                                         const Eigen::MatrixXd& actions) const {
  return q_target.Forward(ConcatColumns(states, actions)).col(0);
}

Eigen::VectorXd CriticSet::Values(const Eigen::MatrixXd& states) const {
  return v_net.Forward(states).col(0);
}

double FitValueStep(MlpNet& v_net, AdamState& adam, const Eigen::MatrixXd& states,
                    const Eigen::VectorXd& q_values, double tau) {
  if (states.rows() != q_values.size() || states.rows() == 0) {
    throw ContractError("value batch shape mismatch");
  }
  const ForwardTrace trace = v_net.ForwardWithTrace(states);
  const double batch = static_cast<double>(states.rows());
  double loss = 0.0;
  Eigen::MatrixXd upstream(states.rows(), 1);
  for (Eigen::Index r = 0; r < states.rows(); ++r) {
    const double u = q_values(r) - trace.output(r, 0);
    const double weight = u < 0.0 ? 1.0 - tau : tau;
    loss += weight * u * u;
    // d/dV of weight * (q - V)^2
    upstream(r, 0) = -2.0 * weight * u / batch;
  }
  AdamStep(v_net, v_net.Backward(trace, upstream), adam);
  return loss / batch;
}

double FitQStep(MlpNet& q_net, AdamState& adam, const Eigen::MatrixXd& states,
                const Eigen::MatrixXd& actions, const Eigen::VectorXd& targets) {
  if (states.rows() != targets.size() || states.rows() == 0) {
    throw ContractError("Q batch shape mismatch");
  }
  const ForwardTrace trace = q_net.ForwardWithTrace(ConcatColumns(states, actions));
  const double batch = static_cast<double>(states.rows());
  const Eigen::VectorXd residual = trace.output.col(0) - targets;
  AdamStep(q_net, q_net.Backward(trace, (2.0 / batch) * residual), adam);
  return residual.squaredNorm() / batch;
}

double UpdateValue(CriticSet& critics, const Eigen::MatrixXd& states,
                   const Eigen::MatrixXd& actions) {
  const Eigen::VectorXd q = critics.TargetQValues(states, actions);
  return FitValueStep(critics.v_net, critics.v_adam, states, q, critics.expectile);
}

double UpdateQ(CriticSet& critics, const TransitionBatch& batch) {
  const Eigen::Index n = batch.states.rows();
  if (batch.actions.rows() != n || batch.rewards.size() != n || batch.next_states.rows() != n ||
      batch.dones.size() != n) {
    throw ContractError("transition batch columns differ in length");
  }
  const Eigen::VectorXd next_v = critics.Values(batch.next_states);
  const Eigen::VectorXd targets =
      batch.rewards.array() +
      critics.discount * (1.0 - batch.dones.array()) * next_v.array();
  return FitQStep(critics.q_net, critics.q_adam, batch.states, batch.actions, targets);
}

void SoftUpdateTarget(CriticSet& critics) {
  SoftUpdate(critics.q_target, critics.q_net, critics.soft_update_rate);
}

}  // namespace gpdp
