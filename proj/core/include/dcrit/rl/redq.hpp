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

#ifndef DCRIT_RL_REDQ_HPP_
#define DCRIT_RL_REDQ_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcrit/dpp.hpp"
#include "dcrit/nn.hpp"
#include "dcrit/rl/env.hpp"
#include "dcrit/rl/policy.hpp"
#include "dcrit/rl/replay_buffer.hpp"
#include "dcrit/rng.hpp"

namespace dcrit::rl {

// How the k critics that receive gradient steps are chosen each round.
enum class Selection { kDns, kRandomK, kAll };

std::string to_string(Selection s);
Selection selection_from_string(const std::string& name);  // "dns", "random_k", "all"

// Which target networks move after an update round.
enum class TargetUpdate { kSelected, kAll };

struct RedqConfig {
  int ensemble_size = 10;  // N
  int select_k = 5;        // k, critics trained per round
  int target_subset = 2;   // M, in-target minimization subset size
  int utd_ratio = 1;       // G, update rounds per environment step
  double gamma = 0.99;
  double rho = 0.995;      // polyak factor
  double alpha = 0.01;     // entropy temperature (fixed)
  double critic_lr = 1e-3;
  double policy_lr = 1e-3;
  int batch_size = 64;
  std::vector<int> hidden_sizes{32, 32};
  int buffer_capacity = 100000;
  int warmup_steps = 1000;
  long total_steps = 20000;
  int cadence = 100;
  int eval_episodes = 10;
  Selection selection = Selection::kDns;
  TargetUpdate target_update = TargetUpdate::kSelected;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

// Per-critic state: online net, its target copy, optimizer moments.
struct Critic {
  nn::Mlp net;
  nn::Mlp target;
  nn::AdamState optimizer;

  explicit Critic(nn::Mlp init) : net(init), target(init), optimizer(net) {}
};

std::vector<Critic> make_critics(int count, int input_size, const std::vector<int>& hidden,
                                 SeededRng& init_rng);

// y = r + gamma (1 - done) (min_{i in mset} Q_targ,i(s', a') - alpha log pi(a'|s')).
// next_noise: action_dim x B standard normals for a' ~ pi(.|s').
Eigen::VectorXd compute_target(const Batch& batch, std::span<const Critic> critics,
                               const SquashedGaussianPolicy& policy, const dpp::IndexSet& mset,
                               double gamma, double alpha, const Eigen::MatrixXd& next_noise,
                               nn::FlopLedger& ledger);

struct SelectionStats {
  long rounds = 0;
  long dpp_fallbacks = 0;  // insufficient kernel rank -> uniform k-subset
};

// q_values[i] = Q_i(s, a) over the current batch, one entry per critic.
dpp::IndexSet select_critics(std::span<const Eigen::VectorXd> q_values, const RedqConfig& cfg,
                             SeededRng& rng, SelectionStats* stats = nullptr);

// One MSE gradient step for every critic in `selected`. `tapes` holds one
// slot per critic; empty slots are filled by a forward pass here. Slots of
// updated critics are cleared, since their parameters have moved.
// Returns the pre-step loss of each updated critic, in `selected` order.
std::vector<double> critic_update(std::span<Critic> critics, const dpp::IndexSet& selected,
                                  const Eigen::MatrixXd& state_actions,
                                  const Eigen::VectorXd& y, const nn::AdamOptions& opts,
                                  std::vector<nn::Tape>& tapes, nn::FlopLedger& ledger);

void target_polyak(std::span<Critic> critics, const dpp::IndexSet& which, double rho);

struct PolicyLoss {
  double loss;  // mean_b( alpha log pi - (1/N) sum_i Q_i(s, a~) )
  nn::GradBundle grads;
};

// Loss and gradient of the actor objective using every critic, for fixed noise.
PolicyLoss policy_loss_and_grad(const SquashedGaussianPolicy& policy,
                                std::span<const Critic> critics, const Eigen::MatrixXd& states,
                                const Eigen::MatrixXd& noise, double alpha,
                                nn::FlopLedger& ledger);

double policy_update(SquashedGaussianPolicy& policy, nn::AdamState& optimizer,
                     std::span<const Critic> critics, const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& noise, double alpha, const nn::AdamOptions& opts,
                     nn::FlopLedger& ledger);

struct MetricsRow {
  long step = 0;
  double episode_return = 0.0;
  std::vector<double> mean_q;  // per critic
  double cross_critic_q_std = 0.0;
  double mean_pairwise_cka = 0.0;
  std::uint64_t fwd_flops = 0;
  std::uint64_t bwd_flops = 0;
  std::string selected_indices;
};

struct LedgerBreakdown {
  nn::FlopLedger critic;  // critic forward + backward in update rounds
  nn::FlopLedger policy;  // actor update, including backprop through critics
  nn::FlopLedger target;  // target computation (policy at s', target critics)
  nn::FlopLedger acting;  // environment interaction

  nn::FlopLedger total() const;
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
  std::vector<double> eval_returns;
  double final_return = 0.0;  // mean deterministic evaluation return
  LedgerBreakdown ledger;
  long update_rounds = 0;
  long policy_updates = 0;
  SelectionStats selection;
  long clamped_actions = 0;
  // Backward FLOPs of one critic update and of one policy update.
  std::uint64_t critic_step_bwd = 0;
  std::uint64_t policy_step_bwd = 0;
};

// Full training run on the point-mass environment. Deterministic per seed.
RunMetrics train(const RedqConfig& cfg, std::uint64_t seed, const PointMassSpec& env = {});

// Backward FLOPs for a single critic update and a single policy update.
std::uint64_t critic_step_backward_flops(const RedqConfig& cfg, int state_dim, int action_dim);
std::uint64_t policy_step_backward_flops(const RedqConfig& cfg, int state_dim, int action_dim);

// Mean return of `episodes` deterministic rollouts from seeded start states.
double evaluate(const SquashedGaussianPolicy& policy, const PointMassSpec& env, int episodes,
                SeededRng& rng, nn::FlopLedger& ledger, std::vector<double>* returns = nullptr);

}  // namespace dcrit::rl

#endif  // DCRIT_RL_REDQ_HPP_
