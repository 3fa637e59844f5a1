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

#ifndef DCRIT_RL_METRICS_HPP_
#define DCRIT_RL_METRICS_HPP_

#include <ostream>
#include <span>
#include <string>

#include "dcrit/rl/redq.hpp"

namespace dcrit::rl {

// %.9g
std::string format_float(double v);

// Header: step,episode_return,mean_q_0..mean_q_{N-1},cross_critic_q_std,
// mean_pairwise_cka,fwd_flops,bwd_flops,selected_indices
std::string metrics_header(int ensemble_size);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows, int ensemble_size);

}  // namespace dcrit::rl

#endif  // DCRIT_RL_METRICS_HPP_
