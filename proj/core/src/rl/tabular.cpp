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

#include "dcrit/rl/tabular.hpp"

#include "dcrit/errors.hpp"

namespace dcrit::rl {

TabularEnsemble::TabularEnsemble(int members, int states, int actions, double lr)
    : learning_rate(lr) {
  if (members < 1 || states < 1 || actions < 1) {
    throw ValidationError("TabularEnsemble: sizes must be positive");
  }
  if (!(lr > 0.0 && lr <= 1.0)) throw ValidationError("TabularEnsemble: learning rate must be in (0, 1]");
  q.assign(static_cast<std::size_t>(members), Eigen::MatrixXd::Zero(states, actions));
}

void tabular_step(TabularEnsemble& ensemble, int state, int action, double target,
                  std::span<const int> indicators) {
  if (static_cast<int>(indicators.size()) != ensemble.members()) {
    throw ValidationError("tabular_step: one indicator per member required");
  }
  const auto& shape = ensemble.q.front();
  if (state < 0 || state >= shape.rows() || action < 0 || action >= shape.cols()) {
    throw ValidationError("tabular_step: (state, action) out of range");
  }
  for (std::size_t i = 0; i < indicators.size(); ++i) {
    if (indicators[i] != 0 && indicators[i] != 1) {
      throw ValidationError("tabular_step: indicators must be 0 or 1");
    }
    double& value = ensemble.q[i](state, action);
    value += ensemble.learning_rate * indicators[i] * (target - value);
  }
}

}  // namespace dcrit::rl
