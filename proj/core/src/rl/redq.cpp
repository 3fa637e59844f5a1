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

#include "dcrit/rl/redq.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dcrit/errors.hpp"
#include "dcrit/kernel.hpp"
#include "dcrit/linalg.hpp"
#include "dcrit/log.hpp"

namespace dcrit::rl {

namespace {

enum Stream : std::uint64_t {
  kInitStream = 1,
  kEnvStream,
  kExploreStream,
  kBufferStream,
  kNoiseStream,
  kSelectStream,
  kTargetSubsetStream,
  kMetricsStream,
  kEvalStream,
};

std::vector<int> critic_layers(int input_size, const std::vector<int>& hidden) {
  std::vector<int> sizes{input_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError("config field '" + field + "': " + what);
}

[[noreturn]] void abort_non_finite(const std::string& what, long step) {
  std::ostringstream msg;
  msg << "non-finite " << what << " at step " << step;
  throw NumericError(msg.str());
}

}  // namespace

std::string to_string(Selection s) {
  switch (s) {
    case Selection::kDns: return "dns";
    case Selection::kRandomK: return "random_k";
    case Selection::kAll: return "all";
  }
  return "unknown";
}

Selection selection_from_string(const std::string& name) {
  if (name == "dns") return Selection::kDns;
  if (name == "random_k") return Selection::kRandomK;
  if (name == "all") return Selection::kAll;
  throw ValidationError("unknown selection '" + name + "' (expected dns, random_k or all)");
}

void RedqConfig::validate() const {
  require(ensemble_size >= 1 && ensemble_size <= 64, "N", "must be in [1, 64]");
  require(select_k >= 1 && select_k <= ensemble_size, "k", "must satisfy 1 <= k <= N");
  require(target_subset >= 1 && target_subset <= ensemble_size, "M",
          "must satisfy 1 <= M <= N");
  require(utd_ratio >= 1, "G", "must be >= 1");
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must be in (0, 1)");
  require(rho > 0.0 && rho < 1.0, "rho", "must be in (0, 1)");
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha", "must be finite and >= 0");
  require(critic_lr > 0.0 && std::isfinite(critic_lr), "critic_lr", "must be positive");
  require(policy_lr > 0.0 && std::isfinite(policy_lr), "policy_lr", "must be positive");
  require(batch_size >= 2, "batch_size", "must be >= 2");
  require(!hidden_sizes.empty(), "hidden_sizes", "must list at least one layer");
  for (int h : hidden_sizes) require(h >= 1, "hidden_sizes", "entries must be positive");
  require(buffer_capacity >= batch_size, "buffer_capacity", "must be >= batch_size");
  require(warmup_steps >= 0, "warmup_steps", "must be >= 0");
  require(total_steps >= 1, "total_steps", "must be >= 1");
  require(cadence >= 1, "cadence", "must be >= 1");
  require(eval_episodes >= 1, "eval_episodes", "must be >= 1");
}

std::vector<Critic> make_critics(int count, int input_size, const std::vector<int>& hidden,
                                 SeededRng& init_rng) {
  std::vector<Critic> critics;
  critics.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    critics.emplace_back(
        nn::Mlp(critic_layers(input_size, hidden), nn::Activation::kRelu, init_rng));
  }
  return critics;
}

Eigen::VectorXd compute_target(const Batch& batch, std::span<const Critic> critics,
                               const SquashedGaussianPolicy& policy, const dpp::IndexSet& mset,
                               double gamma, double alpha, const Eigen::MatrixXd& next_noise,
                               nn::FlopLedger& ledger) {
  if (mset.empty()) throw ValidationError("compute_target: empty target subset");
  for (int i : mset) {
    if (i >= static_cast<int>(critics.size())) {
      throw ValidationError("compute_target: target index out of range");
    }
  }
  const PolicySample next = policy.sample(batch.next_states, next_noise, ledger);
  Eigen::MatrixXd input(batch.next_states.rows() + next.action.rows(), batch.size());
  input << batch.next_states, next.action;

  Eigen::VectorXd min_q = Eigen::VectorXd::Constant(batch.size(),
                                                    std::numeric_limits<double>::infinity());
  for (int i : mset) {
    const nn::Tape tape = critics[static_cast<std::size_t>(i)].target.forward(input, ledger);
    min_q = min_q.cwiseMin(tape.output().row(0).transpose());
  }
  const Eigen::VectorXd soft = min_q - alpha * next.log_prob;
  return batch.rewards.array() + gamma * (1.0 - batch.dones.array()) * soft.array();
}

dpp::IndexSet select_critics(std::span<const Eigen::VectorXd> q_values, const RedqConfig& cfg,
                             SeededRng& rng, SelectionStats* stats) {
  const int n = cfg.ensemble_size;
  if (stats != nullptr) ++stats->rounds;
  switch (cfg.selection) {
    case Selection::kAll:
      return dpp::IndexSet::range(n);
    case Selection::kRandomK:
      return dpp::IndexSet(rng.choose_subset(n, cfg.select_k));
    case Selection::kDns:
      break;
  }
  if (static_cast<int>(q_values.size()) != n) {
    throw ValidationError("select_critics: expected Q-values from all " + std::to_string(n) +
                          " critics, got " + std::to_string(q_values.size()));
  }
  const kernel::SimilarityMatrix similarity = kernel::build_similarity(q_values);
  const linalg::SymMatrix l = linalg::nearest_psd(similarity.as_sym());
  try {
    return dpp::KDppSampler(l, cfg.select_k).sample(rng);
  } catch (const KernelRankError& e) {
    if (stats != nullptr) ++stats->dpp_fallbacks;
    log::info(std::string("select_critics: ") + e.what() + "; using a uniform k-subset");
    return dpp::IndexSet(rng.choose_subset(n, cfg.select_k));
  }
}

std::vector<double> critic_update(std::span<Critic> critics, const dpp::IndexSet& selected,
                                  const Eigen::MatrixXd& state_actions,
                                  const Eigen::VectorXd& y, const nn::AdamOptions& opts,
                                  std::vector<nn::Tape>& tapes, nn::FlopLedger& ledger) {
  if (selected.empty()) throw ValidationError("critic_update: selection must be non-empty");
  if (tapes.size() != critics.size()) tapes.resize(critics.size());
  const auto batch = static_cast<double>(state_actions.cols());
  if (y.size() != state_actions.cols()) throw ValidationError("critic_update: target size mismatch");

  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(selected.size()));
  for (int i : selected) {
    if (i >= static_cast<int>(critics.size())) {
      throw ValidationError("critic_update: critic index out of range");
    }
    auto& critic = critics[static_cast<std::size_t>(i)];
    auto& tape = tapes[static_cast<std::size_t>(i)];
    if (tape.empty()) tape = critic.net.forward(state_actions, ledger);
    const Eigen::RowVectorXd residual = tape.output().row(0) - y.transpose();
    const double loss = residual.squaredNorm() / batch;
    if (!std::isfinite(loss)) {
      throw NumericError("critic_update: non-finite loss for critic " + std::to_string(i));
    }
    const nn::GradBundle grads = critic.net.backward(tape, (2.0 / batch) * residual, ledger);
    tape = nn::Tape{};
    nn::adam_step(critic.net, grads, critic.optimizer, opts);
    losses.push_back(loss);
  }
  return losses;
}

void target_polyak(std::span<Critic> critics, const dpp::IndexSet& which, double rho) {
  for (int i : which) {
    if (i >= static_cast<int>(critics.size())) {
      throw ValidationError("target_polyak: critic index out of range");
    }
    auto& c = critics[static_cast<std::size_t>(i)];
    nn::polyak_update(c.target, c.net, rho);
  }
}

PolicyLoss policy_loss_and_grad(const SquashedGaussianPolicy& policy,
                                std::span<const Critic> critics, const Eigen::MatrixXd& states,
                                const Eigen::MatrixXd& noise, double alpha,
                                nn::FlopLedger& ledger) {
  if (critics.empty()) throw ValidationError("policy_loss_and_grad: no critics");
  const PolicySample s = policy.sample(states, noise, ledger);
  const Eigen::Index batch = states.cols();
  const double inv_n = 1.0 / static_cast<double>(critics.size());
  const double inv_b = 1.0 / static_cast<double>(batch);

  Eigen::MatrixXd input(states.rows() + s.action.rows(), batch);
  input << states, s.action;

  Eigen::VectorXd q_mean = Eigen::VectorXd::Zero(batch);
  Eigen::MatrixXd d_action = Eigen::MatrixXd::Zero(s.action.rows(), batch);
  const Eigen::MatrixXd upstream = Eigen::MatrixXd::Constant(1, batch, -inv_n * inv_b);
  for (const auto& critic : critics) {
    const nn::Tape tape = critic.net.forward(input, ledger);
    q_mean += inv_n * tape.output().row(0).transpose();
    const nn::GradBundle g = critic.net.backward(tape, upstream, ledger);
    d_action += g.input_grad.bottomRows(s.action.rows());
  }

  PolicyLoss out;
  out.loss = (alpha * s.log_prob - q_mean).mean();
  const Eigen::VectorXd d_log_prob = Eigen::VectorXd::Constant(batch, alpha * inv_b);
  out.grads = policy.backward(s, d_action, d_log_prob, ledger);
  return out;
}

double policy_update(SquashedGaussianPolicy& policy, nn::AdamState& optimizer,
                     std::span<const Critic> critics, const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& noise, double alpha, const nn::AdamOptions& opts,
                     nn::FlopLedger& ledger) {
  PolicyLoss pl = policy_loss_and_grad(policy, critics, states, noise, alpha, ledger);
  if (!std::isfinite(pl.loss)) throw NumericError("policy_update: non-finite loss");
  nn::adam_step(policy.net(), pl.grads, optimizer, opts);
  return pl.loss;
}

nn::FlopLedger LedgerBreakdown::total() const {
  nn::FlopLedger t;
  t += critic;
  t += policy;
  t += target;
  t += acting;
  return t;
}

std::uint64_t critic_step_backward_flops(const RedqConfig& cfg, int state_dim, int action_dim) {
  const nn::Mlp critic(critic_layers(state_dim + action_dim, cfg.hidden_sizes),
                       nn::Activation::kRelu);
  return critic.backward_flops_per_sample() * static_cast<std::uint64_t>(cfg.batch_size);
}

std::uint64_t policy_step_backward_flops(const RedqConfig& cfg, int state_dim, int action_dim) {
  SeededRng unused(0);
  const SquashedGaussianPolicy policy(state_dim, action_dim, cfg.hidden_sizes, unused);
  const std::uint64_t per_sample =
      policy.net().backward_flops_per_sample() +
      static_cast<std::uint64_t>(cfg.ensemble_size) *
          (critic_step_backward_flops(cfg, state_dim, action_dim) /
           static_cast<std::uint64_t>(cfg.batch_size));
  return per_sample * static_cast<std::uint64_t>(cfg.batch_size);
}

double evaluate(const SquashedGaussianPolicy& policy, const PointMassSpec& spec, int episodes,
                SeededRng& rng, nn::FlopLedger& ledger, std::vector<double>* returns) {
  PointMassEnv env(spec);
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng);
    double ret = 0.0;
    while (!env.time_limit_reached()) {
      const Eigen::MatrixXd a =
          policy.deterministic_action(Eigen::MatrixXd(env.state()), ledger);
      ret += env.step(a(0, 0)).reward;
    }
    if (returns != nullptr) returns->push_back(ret);
    sum += ret;
  }
  return sum / static_cast<double>(episodes);
}

RunMetrics train(const RedqConfig& cfg, std::uint64_t seed, const PointMassSpec& spec) {
  cfg.validate();
  constexpr int kStateDim = PointMassSpec::kStateDim;
  constexpr int kActionDim = PointMassSpec::kActionDim;
  const int n = cfg.ensemble_size;

  const SeededRng root(seed);
  SeededRng init_rng = root.derive(kInitStream);
  SeededRng env_rng = root.derive(kEnvStream);
  SeededRng explore_rng = root.derive(kExploreStream);
  SeededRng buffer_rng = root.derive(kBufferStream);
  SeededRng noise_rng = root.derive(kNoiseStream);
  SeededRng select_rng = root.derive(kSelectStream);
  SeededRng subset_rng = root.derive(kTargetSubsetStream);
  SeededRng metrics_rng = root.derive(kMetricsStream);
  SeededRng eval_rng = root.derive(kEvalStream);

  std::vector<Critic> critics = make_critics(n, kStateDim + kActionDim, cfg.hidden_sizes, init_rng);
  SquashedGaussianPolicy policy(kStateDim, kActionDim, cfg.hidden_sizes, init_rng);
  nn::AdamState policy_opt(policy.net());
  const nn::AdamOptions critic_opts{cfg.critic_lr};
  const nn::AdamOptions policy_opts{cfg.policy_lr};

  ReplayBuffer buffer(cfg.buffer_capacity, kStateDim, kActionDim);
  PointMassEnv env(spec);
  env.reset(env_rng);

  RunMetrics run;
  run.critic_step_bwd = critic_step_backward_flops(cfg, kStateDim, kActionDim);
  run.policy_step_bwd = policy_step_backward_flops(cfg, kStateDim, kActionDim);

  double episode_return = 0.0;
  double last_episode_return = 0.0;
  bool have_episode = false;
  dpp::IndexSet last_selected;
  std::vector<nn::Tape> tapes(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> q_values(static_cast<std::size_t>(n));

  for (long t = 0; t < cfg.total_steps; ++t) {
    const Eigen::Vector2d state = env.state();
    double action;
    if (t < cfg.warmup_steps) {
      action = explore_rng.uniform(-1.0, 1.0);
    } else {
      const PolicySample s = policy.sample(Eigen::MatrixXd(state), noise_rng, run.ledger.acting);
      action = s.action(0, 0);
    }
    const EnvStep step = env.step(action);
    Transition tr;
    tr.state = state;
    tr.action = Eigen::VectorXd::Constant(1, action);
    tr.reward = step.reward;
    tr.next_state = step.next_state;
    tr.done = step.done;
    buffer.add(tr);
    episode_return += step.reward;
    if (step.done || env.time_limit_reached()) {
      last_episode_return = episode_return;
      have_episode = true;
      episode_return = 0.0;
      env.reset(env_rng);
    }

    if (t >= cfg.warmup_steps) {
      Batch batch;
      for (int g = 0; g < cfg.utd_ratio; ++g) {
        batch = buffer.sample(cfg.batch_size, buffer_rng);
        const dpp::IndexSet mset(subset_rng.choose_subset(n, cfg.target_subset));
        const Eigen::MatrixXd next_noise = standard_normal(kActionDim, cfg.batch_size, noise_rng);
        const Eigen::VectorXd y = compute_target(batch, critics, policy, mset, cfg.gamma,
                                                 cfg.alpha, next_noise, run.ledger.target);
        const Eigen::MatrixXd sa = batch.state_actions();
        for (auto& tape : tapes) tape = nn::Tape{};
        if (cfg.selection == Selection::kDns) {
          for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            tapes[ui] = critics[ui].net.forward(sa, run.ledger.critic);
            q_values[ui] = tapes[ui].output().row(0).transpose();
          }
        }
        last_selected = select_critics(q_values, cfg, select_rng, &run.selection);
        critic_update(critics, last_selected, sa, y, critic_opts, tapes, run.ledger.critic);
        target_polyak(critics,
                      cfg.target_update == TargetUpdate::kAll ? dpp::IndexSet::range(n)
                                                              : last_selected,
                      cfg.rho);
        ++run.update_rounds;
      }
      const Eigen::MatrixXd noise = standard_normal(kActionDim, cfg.batch_size, noise_rng);
      policy_update(policy, policy_opt, critics, batch.states, noise, cfg.alpha, policy_opts,
                    run.ledger.policy);
      ++run.policy_updates;
    }

    if ((t + 1) % cfg.cadence == 0) {
      MetricsRow row;
      row.step = t + 1;
      row.episode_return = have_episode ? last_episode_return : episode_return;
      const Batch probe = buffer.sample(cfg.batch_size, metrics_rng);
      const Eigen::MatrixXd sa = probe.state_actions();
      nn::FlopLedger scratch;
      std::vector<Eigen::VectorXd> probe_q;
      probe_q.reserve(static_cast<std::size_t>(n));
      row.mean_q.reserve(static_cast<std::size_t>(n));
      for (const auto& c : critics) {
        probe_q.emplace_back(c.net.forward(sa, scratch).output().row(0).transpose());
        row.mean_q.push_back(probe_q.back().mean());
      }
      const Eigen::Map<const Eigen::VectorXd> means(row.mean_q.data(), n);
      row.cross_critic_q_std =
          std::sqrt((means.array() - means.mean()).square().sum() / static_cast<double>(n));
      row.mean_pairwise_cka =
          n >= 2 ? kernel::build_similarity(probe_q).mean_off_diagonal() : 1.0;
      const nn::FlopLedger total = run.ledger.total();
      row.fwd_flops = total.forward_flops;
      row.bwd_flops = total.backward_flops;
      row.selected_indices = last_selected.to_string(';');
      if (!std::isfinite(row.episode_return)) abort_non_finite("episode return", row.step);
      if (!means.allFinite()) abort_non_finite("mean Q", row.step);
      if (!std::isfinite(row.cross_critic_q_std)) abort_non_finite("Q std", row.step);
      run.rows.push_back(std::move(row));
    }
  }

  run.final_return = evaluate(policy, spec, cfg.eval_episodes, eval_rng, run.ledger.acting,
                              &run.eval_returns);
  if (!std::isfinite(run.final_return)) abort_non_finite("evaluation return", cfg.total_steps);
  run.clamped_actions = env.clamped_actions();
  return run;
}

}  // namespace dcrit::rl
