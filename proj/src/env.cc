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

#include "gpdp/env.h"

#include <cmath>

#include "gpdp/errors.h"

namespace gpdp {

std::string ToString(ShiftMode mode) {
  return mode == ShiftMode::kZeroed ? "zeroed" : "inverted";
}

ShiftMode ShiftModeFromString(const std::string& name) {
  if (name == "zeroed") return ShiftMode::kZeroed;
  if (name == "inverted") return ShiftMode::kInverted;
  throw ConfigError("unknown shift mode '" + name + "'");
}

bool ShiftSpec::ActiveAt(int t) const {
  if (t < trigger_step) return false;
  return duration < 0 || t < trigger_step + duration;
}

void ShiftSpec::Validate() const {
  if (trigger_step < 0) throw ContractError("shift trigger step must be non-negative");
  if (actuator < 0 || actuator >= kActionDim) throw ContractError("shift actuator out of range");
}

Eigen::VectorXd Observe(const PointMassState& state, const EnvParams& params) {
  Eigen::VectorXd obs(kStateDim);
  obs << state.position, state.velocity, params.goal - state.position;
  return obs;
}

StepOutcome StepDynamics(const EnvParams& params, const PointMassState& state,
                         const Eigen::Vector2d& action, const ShiftSpec& shift,
                         bool shift_active, int t) {
  if (!action.allFinite() || action.cwiseAbs().maxCoeff() > 1.0 + 1e-12) {
    throw ContractError("action outside the [-1, 1]^2 box");
  }
  Eigen::Vector2d effective = action;
  if (shift_active) {
    effective(shift.actuator) =
        shift.mode == ShiftMode::kZeroed ? 0.0 : -effective(shift.actuator);
  }
  StepOutcome out;
  out.next.velocity =
      state.velocity * (1.0 - params.drag * params.dt) + (effective / params.mass) * params.dt;
  out.next.position = state.position + out.next.velocity * params.dt;
  if (!out.next.position.allFinite() || !out.next.velocity.allFinite()) {
    throw EnvironmentFault("point mass state became non-finite");
  }
  const double distance = (out.next.position - params.goal).norm();
  out.reward = -distance;
  out.reached_goal = distance <= params.goal_radius;
  if (out.reached_goal) out.reward += params.goal_bonus;
  out.done = out.reached_goal || t + 1 >= params.horizon;
  return out;
}

PointReacherEnv::PointReacherEnv(EnvParams params, ShiftSpec shift)
    : params_(std::move(params)), shift_(shift) {
  shift_.Validate();
  if (!(params_.mass > 0.0 && params_.dt > 0.0 && params_.drag >= 0.0 && params_.horizon > 0)) {
    throw ContractError("invalid point-mass parameters");
  }
}

Eigen::VectorXd PointReacherEnv::Reset(Rng& rng) {
  std::uniform_real_distribution<double> pos(-params_.init_spread, params_.init_spread);
  std::uniform_real_distribution<double> vel(-0.5 * params_.init_spread,
                                             0.5 * params_.init_spread);
  PointMassState s;
  s.position = Eigen::Vector2d(pos(rng), pos(rng));
  s.velocity = Eigen::Vector2d(vel(rng), vel(rng));
  return ResetTo(s);
}

Eigen::VectorXd PointReacherEnv::ResetTo(const PointMassState& state) {
  state_ = state;
  t_ = 0;
  return Observe(state_, params_);
}

PointReacherEnv::Step PointReacherEnv::Advance(const Eigen::Vector2d& action, bool shift_active) {
  const StepOutcome out = StepDynamics(params_, state_, action, shift_, shift_active, t_);
  state_ = out.next;
  ++t_;
  return {Observe(state_, params_), out.reward, out.done};
}

BehaviorPolicy BehaviorPolicy::ForGrade(BehaviorGrade grade) {
  if (grade == BehaviorGrade::kExpert) return {1.2, 0.8, 0.05};
  return {0.6, 0.4, 0.4};
}

Eigen::Vector2d BehaviorPolicy::Act(const Eigen::VectorXd& observation, Rng& rng) const {
  if (observation.size() != kStateDim) throw ContractError("observation has wrong dimension");
  const Eigen::Vector2d velocity = observation.segment<2>(2);
  const Eigen::Vector2d offset = observation.segment<2>(4);
  Eigen::Vector2d a = kp * offset - kd * velocity;
  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    a(0) += noise(rng);
    a(1) += noise(rng);
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace gpdp
