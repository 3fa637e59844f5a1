// Copyright 2026 The dcrit Authors. All Rights Reserved.
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

#ifndef DCRIT_RL_ENV_HPP_
#define DCRIT_RL_ENV_HPP_

#include <Eigen/Dense>

#include "dcrit/rng.hpp"

namespace dcrit::rl {

// 1-D point mass driven toward the origin.
//   state  = (position x, velocity v), both in [-1, 1]
//   action = a in [-1, 1] (out-of-range actions are clamped)
//   x' = clamp(x + 0.05 v), v' = clamp(v + 0.1 a), reward = -(x^2 + 0.1 a^2)
// The reward is evaluated at the pre-step state. Episodes are time limited
// and never terminate early.
struct PointMassSpec {
  static constexpr int kStateDim = 2;
  static constexpr int kActionDim = 1;
  static constexpr double kDt = 0.05;
  static constexpr double kAccel = 0.1;
  static constexpr double kActionCost = 0.1;
  int episode_length = 200;
};

struct EnvStep {
  Eigen::Vector2d next_state;
  double reward;
  bool done;               // terminal (always false for the point mass)
  bool action_clamped;
};

EnvStep toy_env_step(const Eigen::Vector2d& state, double action);

class PointMassEnv {
 public:
  explicit PointMassEnv(PointMassSpec spec = {}) : spec_(spec) {}

  // Position and velocity drawn uniformly from [-1, 1].
  const Eigen::Vector2d& reset(SeededRng& rng);
  const Eigen::Vector2d& reset(const Eigen::Vector2d& state);

  EnvStep step(double action);

  const Eigen::Vector2d& state() const { return state_; }
  int elapsed() const { return elapsed_; }
  bool time_limit_reached() const { return elapsed_ >= spec_.episode_length; }
  long clamped_actions() const { return clamped_actions_; }
  const PointMassSpec& spec() const { return spec_; }

 private:
  PointMassSpec spec_;
  Eigen::Vector2d state_ = Eigen::Vector2d::Zero();
  int elapsed_ = 0;
  long clamped_actions_ = 0;
};

// Proportional-derivative controller used as a known-good reference policy.
double greedy_to_origin(const Eigen::Vector2d& state);

}  // namespace dcrit::rl

#endif  // DCRIT_RL_ENV_HPP_
