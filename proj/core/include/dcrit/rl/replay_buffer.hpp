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

#ifndef DCRIT_RL_REPLAY_BUFFER_HPP_
#define DCRIT_RL_REPLAY_BUFFER_HPP_

#include <Eigen/Dense>

#include "dcrit/rng.hpp"

namespace dcrit::rl {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
};

// Column-major minibatch: one transition per column.
struct Batch {
  Eigen::MatrixXd states;       // state_dim x B
  Eigen::MatrixXd actions;      // action_dim x B
  Eigen::VectorXd rewards;      // B
  Eigen::MatrixXd next_states;  // state_dim x B
  Eigen::VectorXd dones;        // B, 0 or 1

  int size() const { return static_cast<int>(rewards.size()); }
  // [states; actions], the critic input.
  Eigen::MatrixXd state_actions() const;
};

// Fixed-capacity ring buffer; the oldest transition is overwritten when full.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int state_dim, int action_dim);

  void add(const Transition& t);
  int size() const { return size_; }
  int capacity() const { return capacity_; }

  // Uniform with replacement over the filled region.
  Batch sample(int batch_size, SeededRng& rng) const;

 private:
  int capacity_;
  int state_dim_;
  int action_dim_;
  int size_ = 0;
  int next_ = 0;
  Eigen::MatrixXd states_;
  Eigen::MatrixXd actions_;
  Eigen::VectorXd rewards_;
  Eigen::MatrixXd next_states_;
  Eigen::VectorXd dones_;
};

}  // namespace dcrit::rl

#endif  // DCRIT_RL_REPLAY_BUFFER_HPP_
