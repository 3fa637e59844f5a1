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

#include "dcrit/rl/policy.hpp"

#include <cmath>
#include <numbers>

#include "dcrit/errors.hpp"

namespace dcrit::rl {

namespace {

std::vector<int> policy_layers(int state_dim, int action_dim, const std::vector<int>& hidden) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * action_dim);
  return sizes;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Eigen::MatrixXd standard_normal(int rows, int cols, SeededRng& rng) {
  Eigen::MatrixXd out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) out(r, c) = rng.normal();
  }
  return out;
}

SquashedGaussianPolicy::SquashedGaussianPolicy(int state_dim, int action_dim,
                                               const std::vector<int>& hidden,
                                               SeededRng& init_rng)
    : action_dim_(action_dim),
      net_(policy_layers(state_dim, action_dim, hidden), nn::Activation::kRelu, init_rng) {}

PolicySample SquashedGaussianPolicy::sample(const Eigen::MatrixXd& states,
                                            const Eigen::MatrixXd& noise,
                                            nn::FlopLedger& ledger) const {
  if (noise.rows() != action_dim_ || noise.cols() != states.cols()) {
    throw ValidationError("SquashedGaussianPolicy::sample: noise shape mismatch");
  }
  PolicySample s;
  s.tape = net_.forward(states, ledger);
  const Eigen::MatrixXd& out = s.tape.output();
  s.mean = out.topRows(action_dim_);
  const Eigen::MatrixXd raw = out.bottomRows(action_dim_);
  s.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.clamp_mask = ((raw.array() >= kLogStdMin) && (raw.array() <= kLogStdMax)).cast<double>();
  s.noise = noise;
  s.pre_tanh = s.mean.array() + s.log_std.array().exp() * noise.array();
  s.action = s.pre_tanh.array().tanh();

  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Eigen::Index batch = states.cols();
  s.log_prob.resize(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    double lp = 0.0;
    for (int j = 0; j < action_dim_; ++j) {
      const double eps = noise(j, b);
      const double u = s.pre_tanh(j, b);
      lp += -0.5 * eps * eps - s.log_std(j, b) - half_log_two_pi;
      // log(1 - tanh(u)^2), written to stay finite for large |u|.
      lp -= 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
    }
    s.log_prob(b) = lp;
  }
  return s;
}

PolicySample SquashedGaussianPolicy::sample(const Eigen::MatrixXd& states, SeededRng& rng,
                                            nn::FlopLedger& ledger) const {
  return sample(states, standard_normal(action_dim_, static_cast<int>(states.cols()), rng),
                ledger);
}

Eigen::MatrixXd SquashedGaussianPolicy::deterministic_action(const Eigen::MatrixXd& states,
                                                             nn::FlopLedger& ledger) const {
  const nn::Tape tape = net_.forward(states, ledger);
  return tape.output().topRows(action_dim_).array().tanh();
}

nn::GradBundle SquashedGaussianPolicy::backward(const PolicySample& s,
                                                const Eigen::MatrixXd& d_action,
                                                const Eigen::VectorXd& d_log_prob,
                                                nn::FlopLedger& ledger) const {
  const Eigen::Index batch = s.action.cols();
  if (d_action.rows() != action_dim_ || d_action.cols() != batch || d_log_prob.size() != batch) {
    throw ValidationError("SquashedGaussianPolicy::backward: gradient shape mismatch");
  }
  // d log_prob / du = 2 tanh(u) from the correction term; d log_prob / d log_std = -1.
  const Eigen::ArrayXXd dlogp = d_log_prob.transpose().replicate(action_dim_, 1).array();
  const Eigen::ArrayXXd d_u =
      d_action.array() * (1.0 - s.action.array().square()) + dlogp * 2.0 * s.action.array();
  const Eigen::ArrayXXd d_log_std =
      (d_u * s.log_std.array().exp() * s.noise.array() - dlogp) * s.clamp_mask.array();

  Eigen::MatrixXd upstream(2 * action_dim_, batch);
  upstream.topRows(action_dim_) = d_u.matrix();
  upstream.bottomRows(action_dim_) = d_log_std.matrix();
  return net_.backward(s.tape, upstream, ledger);
}

}  // namespace dcrit::rl
