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

#ifndef DCRIT_RL_CONFIG_HPP_
#define DCRIT_RL_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dcrit/rl/env.hpp"
#include "dcrit/rl/redq.hpp"

namespace dcrit::rl {

// A training experiment: one RedqConfig, run for every listed selection
// strategy and seed.
struct TrainConfig {
  RedqConfig redq;
  PointMassSpec env;
  std::vector<std::uint64_t> seeds{0};
  std::vector<Selection> selections{Selection::kDns};
};

// Parses and validates a JSON run config. Unknown keys are rejected; errors
// are ConfigError carrying the line of the offending key when it can be
// located.
//
// Keys: N, k, M, G, gamma, rho, alpha, critic_lr, policy_lr, batch_size,
// hidden_sizes, buffer_capacity, warmup_steps, total_steps, cadence,
// eval_episodes, selection (string or list), target_update ("selected" |
// "all"), env {name: "point_mass", episode_length}, seeds (list) or seed.
TrainConfig parse_train_config(std::string_view json_text);

// Line (1-based) of the first occurrence of "key" in text, or 0.
int locate_key_line(std::string_view text, std::string_view key);

}  // namespace dcrit::rl

#endif  // DCRIT_RL_CONFIG_HPP_
