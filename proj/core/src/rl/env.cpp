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

#include "dcrit/rl/env.hpp"

#include <algorithm>
#include <cmath>

#include "dcrit/errors.hpp"

namespace dcrit::rl {

namespace {
double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }
}  // namespace

EnvStep toy_env_step(const Eigen::Vector2d& state, double action) {
  if (!std::isfinite(action) || !state.allFinite()) {
    throw NumericError("toy_env_step: non-finite state or action");
  }
  const double a = clamp_unit(action);
  const double x = state(0);
  const double v = state(1);
  EnvStep out;
  out.next_state = Eigen::Vector2d(clamp_unit(x + PointMassSpec::kDt * v),
                                   clamp_unit(v + PointMassSpec::kAccel * a));
  out.reward = -(x * x + PointMassSpec::kActionCost * a * a);
  out.done = false;
  out.action_clamped = a != action;
  return out;
}

const Eigen::Vector2d& PointMassEnv::reset(SeededRng& rng) {
  return reset(Eigen::Vector2d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
}

const Eigen::Vector2d& PointMassEnv::reset(const Eigen::Vector2d& state) {
  state_ = state;
  elapsed_ = 0;
  return state_;
}

EnvStep PointMassEnv::step(double action) {
  EnvStep out = toy_env_step(state_, action);
  if (out.action_clamped) ++clamped_actions_;
  state_ = out.next_state;
  ++elapsed_;
  return out;
}

double greedy_to_origin(const Eigen::Vector2d& state) {
  return clamp_unit(-2.0 * state(0) - 3.0 * state(1));
}

}  // namespace dcrit::rl
