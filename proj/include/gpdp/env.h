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

#ifndef GPDP_ENV_H_
#define GPDP_ENV_H_

#include <string>

#include <Eigen/Core>

#include "gpdp/random.h"

namespace gpdp {

inline constexpr int kStateDim = 6;
inline constexpr int kActionDim = 2;

// Planar point mass pushed by a 2-D acceleration command towards a fixed goal.
struct EnvParams {
  double mass = 1.0;
  double drag = 0.5;
  double dt = 0.1;
  int horizon = 200;
  Eigen::Vector2d goal = Eigen::Vector2d(1.0, 1.0);
  double goal_radius = 0.1;
  double goal_bonus = 10.0;
  // Initial position uniform in goal-free box [-spread, spread]^2, initial
  // velocity uniform in [-spread/2, spread/2]^2.
  double init_spread = 0.1;
};

enum class ShiftMode { kZeroed, kInverted };

std::string ToString(ShiftMode mode);
ShiftMode ShiftModeFromString(const std::string& name);

// Actuator fault: from `trigger_step` on, for `duration` steps (negative
// means permanent), the chosen actuator is zeroed or inverted.
struct ShiftSpec {
  int trigger_step = 10;
  int actuator = 0;
  ShiftMode mode = ShiftMode::kZeroed;
  int duration = 30;

  bool ActiveAt(int t) const;
  void Validate() const;
};

struct PointMassState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
};

struct StepOutcome {
  PointMassState next;
  double reward = 0.0;
  bool done = false;
  bool reached_goal = false;
};

// [position, velocity, goal - position].
Eigen::VectorXd Observe(const PointMassState& state, const EnvParams& params);

// Semi-implicit Euler step. `t` is the index of the step being taken; the
// episode ends when the goal radius is reached or t + 1 hits the horizon.
StepOutcome StepDynamics(const EnvParams& params, const PointMassState& state,
                         const Eigen::Vector2d& action, const ShiftSpec& shift,
                         bool shift_active, int t);

class PointReacherEnv {
 public:
  PointReacherEnv(EnvParams params, ShiftSpec shift);

  Eigen::VectorXd Reset(Rng& rng);
  Eigen::VectorXd ResetTo(const PointMassState& state);

  // Applies the shift when `shift_active`; returns the next observation.
  struct Step {
    Eigen::VectorXd observation;
    double reward = 0.0;
    bool done = false;
  };
  Step Advance(const Eigen::Vector2d& action, bool shift_active);

  const PointMassState& state() const { return state_; }
  int t() const { return t_; }
  const EnvParams& params() const { return params_; }
  const ShiftSpec& shift() const { return shift_; }

 private:
  EnvParams params_;
  ShiftSpec shift_;
  PointMassState state_;
  int t_ = 0;
};

enum class BehaviorGrade { kExpert, kMedium };

// Clipped PD controller towards the goal plus Gaussian exploration noise.
struct BehaviorPolicy {
  double kp = 1.2;
  double kd = 0.8;
  double noise_std = 0.05;

  static BehaviorPolicy ForGrade(BehaviorGrade grade);

  Eigen::Vector2d Act(const Eigen::VectorXd& observation, Rng& rng) const;
};

}  // namespace gpdp

#endif  // GPDP_ENV_H_
