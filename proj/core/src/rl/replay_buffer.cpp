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

#include "dcrit/rl/replay_buffer.hpp"

#include <cmath>
#include <string>

#include "dcrit/errors.hpp"

namespace dcrit::rl {

Eigen::MatrixXd Batch::state_actions() const {
  Eigen::MatrixXd out(states.rows() + actions.rows(), states.cols());
  out << states, actions;
  return out;
}

ReplayBuffer::ReplayBuffer(int capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity < 1 || state_dim < 1 || action_dim < 1) {
    throw ValidationError("ReplayBuffer: capacity and dimensions must be positive");
  }
  states_.resize(state_dim, capacity);
  actions_.resize(action_dim, capacity);
  rewards_.resize(capacity);
  next_states_.resize(state_dim, capacity);
  dones_.resize(capacity);
}

void ReplayBuffer::add(const Transition& t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
      t.action.size() != action_dim_) {
    throw ValidationError("ReplayBuffer::add: transition dimension mismatch");
  }
  if (!std::isfinite(t.reward)) throw ValidationError("ReplayBuffer::add: non-finite reward");
  states_.col(next_) = t.state;
  actions_.col(next_) = t.action;
  rewards_(next_) = t.reward;
  next_states_.col(next_) = t.next_state;
  dones_(next_) = t.done ? 1.0 : 0.0;
  next_ = (next_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Batch ReplayBuffer::sample(int batch_size, SeededRng& rng) const {
  if (size_ == 0) throw UsageError("ReplayBuffer::sample: buffer is empty");
  if (batch_size < 1) throw ValidationError("ReplayBuffer::sample: batch size must be positive");
  Batch b;
  b.states.resize(state_dim_, batch_size);
  b.actions.resize(action_dim_, batch_size);
  b.rewards.resize(batch_size);
  b.next_states.resize(state_dim_, batch_size);
  b.dones.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(size_)));
    b.states.col(i) = states_.col(j);
    b.actions.col(i) = actions_.col(j);
    b.rewards(i) = rewards_(j);
    b.next_states.col(i) = next_states_.col(j);
    b.dones(i) = dones_(j);
  }
  return b;
}

}  // namespace dcrit::rl
