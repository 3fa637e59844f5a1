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

#ifndef DCRIT_NN_HPP_
#define DCRIT_NN_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dcrit/rng.hpp"

namespace dcrit::nn {

// Analytic floating-point operation counter.
//
// Convention: a multiply-add is 2 FLOPs; bias adds, activations and
// activation derivatives are 1 FLOP per element. Per sample and per dense
// layer of shape in -> out:
//   forward  = 2*in*out + out (bias) + out (activation)
//   backward = 4*in*out (weight and input gradients) + out (activation mask)
// The output layer is linear but is charged the activation FLOP like every
// other layer. Loss evaluation and optimizer arithmetic are not counted.
struct FlopLedger {
  std::uint64_t forward_flops = 0;
  std::uint64_t backward_flops = 0;

  std::uint64_t total() const { return forward_flops + backward_flops; }
  FlopLedger& operator+=(const FlopLedger& other) {
    forward_flops += other.forward_flops;
    backward_flops += other.backward_flops;
    return *this;
  }
  friend bool operator==(const FlopLedger&, const FlopLedger&) = default;
};

enum class Activation { kRelu, kTanh };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Cached activations of one forward pass over a batch (one sample per column).
struct Tape {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;   // per layer, before activation
  std::vector<Eigen::MatrixXd> post;  // per layer, after activation

  bool empty() const { return post.empty(); }
  const Eigen::MatrixXd& output() const { return post.back(); }
};

struct GradBundle {
  std::vector<DenseLayer> layers;
  Eigen::MatrixXd input_grad;  // d loss / d input, in x batch

  bool all_finite() const;
};

// Fully connected network; hidden layers use `activation`, the output layer
// is affine.
class Mlp {
 public:
  Mlp(std::vector<int> layer_sizes, Activation activation);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  Mlp(std::vector<int> layer_sizes, Activation activation, SeededRng& init_rng);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  Activation activation() const { return activation_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  std::uint64_t forward_flops_per_sample() const;
  std::uint64_t backward_flops_per_sample() const;

  // inputs: input_size x batch.
  Tape forward(const Eigen::MatrixXd& inputs, FlopLedger& ledger) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& input, FlopLedger& ledger) const;

  // Gradient of sum_b <upstream[:, b], output[:, b]> with respect to every
  // parameter and the input. upstream: output_size x batch.
  GradBundle backward(const Tape& tape, const Eigen::MatrixXd& upstream,
                      FlopLedger& ledger) const;

  bool all_finite() const;

 private:
  std::vector<int> sizes_;
  Activation activation_;
  std::vector<DenseLayer> layers_;
};

// target <- rho * target + (1 - rho) * source
void polyak_update(Mlp& target, const Mlp& source, double rho);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(const Mlp& net);
  long step() const { return step_; }

 private:
  friend void adam_step(Mlp&, const GradBundle&, AdamState&, const AdamOptions&);
  long step_ = 0;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
};

// Bias-corrected Adam update in place. A non-finite gradient throws
// NumericError before anything is modified.
void adam_step(Mlp& net, const GradBundle& grads, AdamState& state,
               const AdamOptions& opts);

}  // namespace dcrit::nn

#endif  // DCRIT_NN_HPP_
