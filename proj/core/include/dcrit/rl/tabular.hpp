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

#ifndef DCRIT_RL_TABULAR_HPP_
#define DCRIT_RL_TABULAR_HPP_

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dcrit::rl {

// Ensemble of tabular action-value functions, the setting of the variance
// analysis: member i moves toward the shared target only when its update
// indicator is set.
struct TabularEnsemble {
  TabularEnsemble(int members, int states, int actions, double learning_rate);

  int members() const { return static_cast<int>(q.size()); }

  std::vector<Eigen::MatrixXd> q;  // each states x actions
  double learning_rate;            // alpha_tab
};

// Q_i(s,a) += alpha_tab * I_i * (target - Q_i(s,a)), indicators in {0, 1}.
void tabular_step(TabularEnsemble& ensemble, int state, int action, double target,
                  std::span<const int> indicators);

}  // namespace dcrit::rl

#endif  // DCRIT_RL_TABULAR_HPP_
