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

#include "dcrit/nn.hpp"

#include <cmath>
#include <string>

#include "dcrit/errors.hpp"

namespace dcrit::nn {

namespace {

std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  }
  return out;
}

}  // namespace

bool GradBundle::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return input_grad.allFinite();
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw ValidationError("Mlp: need at least input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw ValidationError("Mlp: layer sizes must be positive");
  }
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]),
                       Eigen::VectorXd::Zero(sizes_[i + 1])});
  }
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation, SeededRng& init_rng)
    : Mlp(std::move(layer_sizes), activation) {
  for (auto& l : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        l.weight(r, c) = init_rng.uniform(-bound, bound);
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = init_rng.uniform(-bound, bound);
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers_) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return count;
}

std::uint64_t Mlp::forward_flops_per_sample() const {
  std::uint64_t flops = 0;
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    const auto in = static_cast<std::uint64_t>(sizes_[i]);
    const auto out = static_cast<std::uint64_t>(sizes_[i + 1]);
    flops += 2 * in * out + out + out;
  }
  return flops;
}

std::uint64_t Mlp::backward_flops_per_sample() const {
  std::uint64_t flops = 0;
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    const auto in = static_cast<std::uint64_t>(sizes_[i]);
    const auto out = static_cast<std::uint64_t>(sizes_[i + 1]);
    flops += 4 * in * out + out;
  }
  return flops;
}

Tape Mlp::forward(const Eigen::MatrixXd& inputs, FlopLedger& ledger) const {
  if (inputs.rows() != input_size()) {
    throw ValidationError("Mlp::forward: input has " + std::to_string(inputs.rows()) +
                          " rows, expected " + std::to_string(input_size()));
  }
  Tape tape;
  tape.input = inputs;
  tape.pre.reserve(layers_.size());
  tape.post.reserve(layers_.size());
  const Eigen::MatrixXd* current = &tape.input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    Eigen::MatrixXd z = l.weight * (*current);
    z.colwise() += l.bias;
    const bool hidden = i + 1 < layers_.size();
    Eigen::MatrixXd a;
    if (!hidden) {
      a = z;
    } else if (activation_ == Activation::kRelu) {
      a = z.cwiseMax(0.0);
    } else {
      a = z.array().tanh().matrix();
    }
    tape.pre.push_back(std::move(z));
    tape.post.push_back(std::move(a));
    current = &tape.post.back();
  }
  ledger.forward_flops += forward_flops_per_sample() * static_cast<std::uint64_t>(inputs.cols());
  return tape;
}

Eigen::VectorXd Mlp::apply(const Eigen::VectorXd& input, FlopLedger& ledger) const {
  return forward(Eigen::MatrixXd(input), ledger).output().col(0);
}

GradBundle Mlp::backward(const Tape& tape, const Eigen::MatrixXd& upstream,
                         FlopLedger& ledger) const {
  if (tape.empty() || tape.post.size() != layers_.size()) {
    throw UsageError("Mlp::backward: no forward tape for this network");
  }
  const Eigen::Index batch = tape.input.cols();
  if (upstream.rows() != output_size() || upstream.cols() != batch) {
    throw ValidationError("Mlp::backward: upstream gradient shape mismatch");
  }
  GradBundle grads;
  grads.layers.resize(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const bool hidden = idx + 1 < layers_.size();
    if (hidden) {
      if (activation_ == Activation::kRelu) {
        delta = (tape.pre[idx].array() > 0.0).select(delta.array(), 0.0).matrix();
      } else {
        delta = (delta.array() * (1.0 - tape.post[idx].array().square())).matrix();
      }
    }
    const Eigen::MatrixXd& layer_input = idx == 0 ? tape.input : tape.post[idx - 1];
    grads.layers[idx].weight = delta * layer_input.transpose();
    grads.layers[idx].bias = delta.rowwise().sum();
    delta = layers_[idx].weight.transpose() * delta;
  }
  grads.input_grad = std::move(delta);
  ledger.backward_flops += backward_flops_per_sample() * static_cast<std::uint64_t>(batch);
  return grads;
}

bool Mlp::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

void polyak_update(Mlp& target, const Mlp& source, double rho) {
  if (target.layer_sizes() != source.layer_sizes()) {
    throw ValidationError("polyak_update: architecture mismatch");
  }
  auto& dst = target.layers();
  const auto& src = source.layers();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i].weight = rho * dst[i].weight + (1.0 - rho) * src[i].weight;
    dst[i].bias = rho * dst[i].bias + (1.0 - rho) * src[i].bias;
  }
}

AdamState::AdamState(const Mlp& net) : m_(zero_like(net.layers())), v_(zero_like(net.layers())) {}

void adam_step(Mlp& net, const GradBundle& grads, AdamState& state,
               const AdamOptions& opts) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size() || state.m_.size() != layers.size()) {
    throw ValidationError("adam_step: gradient/state shape mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& g = grads.layers[i];
    if (g.weight.rows() != layers[i].weight.rows() ||
        g.weight.cols() != layers[i].weight.cols() || g.bias.size() != layers[i].bias.size()) {
      throw ValidationError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    if (!g.weight.allFinite() || !g.bias.allFinite()) {
      throw NumericError("adam_step: non-finite gradient at layer " + std::to_string(i) +
                         "; step skipped");
    }
  }

  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = opts.beta1 * m + (1.0 - opts.beta1) * grad;
    v = opts.beta2 * v + (1.0 - opts.beta2) * grad.cwiseAbs2();
    param.array() -= opts.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opts.eps);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, grads.layers[i].weight, state.m_[i].weight, state.v_[i].weight);
    update(layers[i].bias, grads.layers[i].bias, state.m_[i].bias, state.v_[i].bias);
  }
}

}  // namespace dcrit::nn
