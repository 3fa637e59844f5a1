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

#ifndef DCRIT_RL_POLICY_HPP_
#define DCRIT_RL_POLICY_HPP_

#include <vector>

#include <Eigen/Dense>

#include "dcrit/nn.hpp"
#include "dcrit/rng.hpp"

namespace dcrit::rl {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Reparameterized draw a = tanh(mu + sigma * eps) for a batch of states.
struct PolicySample {
  nn::Tape tape;
  Eigen::MatrixXd mean;        // action_dim x B
  Eigen::MatrixXd log_std;     // clamped
  Eigen::MatrixXd clamp_mask;  // 1 where the raw log-std was inside the clamp range
  Eigen::MatrixXd noise;       // eps
  Eigen::MatrixXd pre_tanh;    // u
  Eigen::MatrixXd action;      // tanh(u)
  Eigen::VectorXd log_prob;    // B, includes the tanh change-of-variables term
};

// Squashed-Gaussian policy; the network outputs [mean; raw log-std].
class SquashedGaussianPolicy {
 public:
  SquashedGaussianPolicy(int state_dim, int action_dim, const std::vector<int>& hidden,
                         SeededRng& init_rng);

  int state_dim() const { return net_.input_size(); }
  int action_dim() const { return action_dim_; }
  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

  // noise: action_dim x B standard normals.
  PolicySample sample(const Eigen::MatrixXd& states, const Eigen::MatrixXd& noise,
                      nn::FlopLedger& ledger) const;
  PolicySample sample(const Eigen::MatrixXd& states, SeededRng& rng,
                      nn::FlopLedger& ledger) const;

  // tanh(mean), for evaluation.
  Eigen::MatrixXd deterministic_action(const Eigen::MatrixXd& states,
                                       nn::FlopLedger& ledger) const;

  // Gradient of a loss J(action, log_prob) given dJ/daction and dJ/dlog_prob.
  nn::GradBundle backward(const PolicySample& s, const Eigen::MatrixXd& d_action,
                          const Eigen::VectorXd& d_log_prob, nn::FlopLedger& ledger) const;

 private:
  int action_dim_;
  nn::Mlp net_;
};

Eigen::MatrixXd standard_normal(int rows, int cols, SeededRng& rng);

}  // namespace dcrit::rl

#endif  // DCRIT_RL_POLICY_HPP_
