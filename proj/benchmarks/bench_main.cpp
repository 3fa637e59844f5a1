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


#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dcrit/dpp.hpp"
#include "dcrit/kernel.hpp"
#include "dcrit/linalg.hpp"
#include "dcrit/nn.hpp"
#include "dcrit/rng.hpp"

namespace {

using dcrit::SeededRng;
using dcrit::linalg::SymMatrix;

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  SeededRng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

SymMatrix random_psd(int n, std::uint64_t seed) {
  const Eigen::MatrixXd b = gaussian(n, n, seed);
  return SymMatrix(b * b.transpose() / n);
}

void BM_Eigh(benchmark::State& state) {
  const SymMatrix s = random_psd(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(dcrit::linalg::eigh(s));
}
BENCHMARK(BM_Eigh)->Arg(6)->Arg(10)->Arg(20)->Arg(40);

void BM_NearestPsd(benchmark::State& state) {
  const Eigen::MatrixXd a = gaussian(10, 10, 2);
  const SymMatrix s = SymMatrix::symmetrize(a);
  for (auto _ : state) benchmark::DoNotOptimize(dcrit::linalg::nearest_psd(s));
}
BENCHMARK(BM_NearestPsd);

void BM_KDppSample(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const dcrit::dpp::KDppSampler sampler(random_psd(n, 3), n / 2);
  SeededRng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(rng));
}
BENCHMARK(BM_KDppSample)->Arg(6)->Arg(10)->Arg(20);

void BM_KDppSetup(benchmark::State& state) {
  const SymMatrix l = random_psd(10, 5);
  for (auto _ : state) benchmark::DoNotOptimize(dcrit::dpp::KDppSampler(l, 5));
}
BENCHMARK(BM_KDppSetup);

void BM_LinearCka(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const dcrit::kernel::ActivationMatrix x(gaussian(n, 16, 6)), y(gaussian(n, 16, 7));
  for (auto _ : state) benchmark::DoNotOptimize(dcrit::kernel::cka(x, y));
}
BENCHMARK(BM_LinearCka)->Arg(64)->Arg(256)->Arg(1024);

void BM_Similarity(benchmark::State& state) {
  std::vector<Eigen::VectorXd> outputs;
  for (int i = 0; i < 10; ++i) outputs.emplace_back(gaussian(256, 1, 10 + i).col(0));
  for (auto _ : state) benchmark::DoNotOptimize(dcrit::kernel::build_similarity(outputs));
}
BENCHMARK(BM_Similarity);

void BM_MlpForwardBackward(benchmark::State& state) {
  SeededRng rng(8);
  const dcrit::nn::Mlp net({3, 32, 32, 1}, dcrit::nn::Activation::kRelu, rng);
  const Eigen::MatrixXd x = gaussian(3, static_cast<int>(state.range(0)), 9);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(1, x.cols());
  dcrit::nn::FlopLedger ledger;
  for (auto _ : state) {
    const auto tape = net.forward(x, ledger);
    benchmark::DoNotOptimize(net.backward(tape, up, ledger));
  }
  state.counters["flops"] = benchmark::Counter(static_cast<double>(ledger.total()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
