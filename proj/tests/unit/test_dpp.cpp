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

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dcrit/dpp.hpp"
#include "dcrit/errors.hpp"
#include "support/oracles.hpp"

namespace dpp = dcrit::dpp;
using dcrit::SeededRng;
using dcrit::linalg::SymMatrix;
using dpp::IndexSet;

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::map<IndexSet, long long> draw_counts(const SymMatrix& l, int k, long draws, std::uint64_t seed) {
  const dpp::KDppSampler sampler(l, k);
  SeededRng rng(seed);
  std::map<IndexSet, long long> counts;
  for (long i = 0; i < draws; ++i) ++counts[sampler.sample(rng)];
  return counts;
}

}  // namespace

TEST_CASE("IndexSet canonical form") {
  const IndexSet s(std::vector<int>{3, 0, 2});
  CHECK(s.members() == std::vector<int>{0, 2, 3});
  CHECK(s.contains(2));
  CHECK_FALSE(s.contains(1));
  CHECK(s.to_string() == "0;2;3");
  CHECK(IndexSet::range(3).members() == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(IndexSet(std::vector<int>{1, 1}), dcrit::ValidationError);
  CHECK_THROWS_AS(IndexSet(std::vector<int>{-1}), dcrit::ValidationError);
}

TEST_CASE("elementary symmetric polynomials") {
  const std::vector<double> lam{1, 2, 3};
  const auto t = dpp::elementary_symmetric(lam, 3);
  CHECK(t(1, 3) == 6.0);
  CHECK(t(2, 3) == 11.0);
  CHECK(t(3, 3) == 6.0);
  const auto ones = dpp::elementary_symmetric(Eigen::VectorXd::Ones(9), 9);
  for (int k = 0; k <= 9; ++k) CHECK(ones(k, 9) == doctest::Approx(binomial(9, k)));

  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 10;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = u(gen);
    const auto e = dpp::elementary_symmetric(v, n);
    for (int m = 0; m <= n; ++m) REQUIRE(e(0, m) == 1.0);
    for (int l = 1; l <= n; ++l) {
      for (int m = 0; m < l; ++m) REQUIRE(e(l, m) == 0.0);
      for (int m = 1; m <= n; ++m) {
        REQUIRE(std::abs(e(l, m) - (e(l, m - 1) + v[static_cast<std::size_t>(m - 1)] * e(l - 1, m - 1))) <=
                1e-12 * (1.0 + e(l, m)));
      }
    }
  }
  CHECK_THROWS_AS(dpp::elementary_symmetric(lam, 4), dcrit::ValidationError);
}

TEST_CASE("kdpp brute-force probabilities") {
  const auto p = dpp::kdpp_prob_bruteforce(SymMatrix{{1, .5, 0}, {.5, 1, 0}, {0, 0, 1}}, 2);
  CHECK(p.at(IndexSet({0, 1})) == doctest::Approx(3.0 / 11.0).epsilon(1e-14));
  CHECK(p.at(IndexSet({0, 2})) == doctest::Approx(4.0 / 11.0).epsilon(1e-14));
  CHECK(p.at(IndexSet({1, 2})) == doctest::Approx(4.0 / 11.0).epsilon(1e-14));
  const auto id = dpp::kdpp_prob_bruteforce(SymMatrix::identity(4), 2);
  CHECK(id.size() == 6);
  for (const auto& [s, q] : id) CHECK(q == doctest::Approx(1.0 / 6.0));
  const std::vector<double> diag{2.0, 1.0};
  const auto d = dpp::kdpp_prob_bruteforce(SymMatrix::diagonal(diag), 1);
  CHECK(d.at(IndexSet({0})) == doctest::Approx(2.0 / 3.0));
  CHECK(d.at(IndexSet({1})) == doctest::Approx(1.0 / 3.0));

  std::mt19937_64 gen(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd l = oracle::random_psd(6, 6, gen);
    const auto ours = dpp::kdpp_prob_bruteforce(SymMatrix(l), 3);
    for (const auto& [set, prob] : oracle::kdpp_probs(l, 3)) {
      REQUIRE(std::abs(ours.at(IndexSet(set)) - prob) <= 1e-10);
    }
  }
}

TEST_CASE("L-ensemble enumeration") {
  const auto zero = dpp::lensemble_prob_bruteforce(SymMatrix::zeros(3));
  CHECK(zero.probabilities.at(IndexSet()) == 1.0);
  const auto one = dpp::lensemble_prob_bruteforce(SymMatrix::identity(1));
  CHECK(one.probabilities.at(IndexSet()) == doctest::Approx(0.5));
  CHECK(one.probabilities.at(IndexSet({0})) == doctest::Approx(0.5));
  std::mt19937_64 gen(33);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd l = oracle::random_psd(4, 4, gen);
    const auto e = dpp::lensemble_prob_bruteforce(SymMatrix(l));
    const double truth = oracle::det_laplace(Eigen::MatrixXd::Identity(4, 4) + l);
    REQUIRE(std::abs(e.normalizer - truth) <= 1e-8 * truth);
    REQUIRE(std::abs(e.det_identity_plus_l - truth) <= 1e-8 * truth);
  }
}

TEST_CASE("sampler errors") {
  SeededRng rng(1);
  CHECK_THROWS_AS(dpp::KDppSampler(SymMatrix{{1, 1}, {1, 1}}, 2), dcrit::KernelRankError);
  CHECK_THROWS_AS(dpp::KDppSampler(SymMatrix::identity(3), 4), dcrit::KernelRankError);
  CHECK_THROWS_AS(dpp::KDppSampler(SymMatrix{{1, 2}, {2, 1}}, 1), dcrit::ValidationError);
  CHECK_THROWS_AS(dpp::KDppSampler(SymMatrix::identity(3), 0), dcrit::ValidationError);
  CHECK_NOTHROW(dpp::KDppSampler(SymMatrix{{1, 1}, {1, 1}}, 1));
  try {
    dpp::KDppSampler(SymMatrix{{1, 1}, {1, 1}}, 2);
  } catch (const dcrit::KernelRankError& e) {
    CHECK(std::string(e.what()).find("insufficient kernel rank") != std::string::npos);
  }
}

TEST_CASE("sampler: determinism and phase-1 cardinality") {
  std::mt19937_64 gen(34);
  const SymMatrix l(oracle::random_psd(7, 5, gen));
  const dpp::KDppSampler sampler(l, 3);
  SeededRng a(9), b(9);
  for (int i = 0; i < 200; ++i) REQUIRE(sampler.sample(a) == sampler.sample(b));
  SeededRng c(10);
  for (int i = 0; i < 2000; ++i) {
    const auto idx = sampler.select_eigenvectors(c);
    REQUIRE(idx.size() == 3);
    REQUIRE(std::is_sorted(idx.begin(), idx.end()));
    const auto s = sampler.sample(c);
    REQUIRE(s.size() == 3);
  }
}

TEST_CASE("sampler: identity kernel gives the uniform k-subset law") {
  const auto counts = draw_counts(SymMatrix::identity(5), 2, 50000, 35);
  CHECK(counts.size() == 10);
  for (const auto& [s, c] : counts) CHECK(std::abs(c / 50000.0 - 0.1) < 0.007);
}

TEST_CASE("sampler: empirical law matches enumeration on random kernels") {
  std::mt19937_64 gen(36);
  for (int trial = 0; trial < 3; ++trial) {
    const SymMatrix l(oracle::random_psd(5, 5, gen));
    for (int k : {1, 2, 4}) {
      const long draws = 40000;
      const double tv = dpp::total_variation(dpp::kdpp_prob_bruteforce(l, k), draw_counts(l, k, draws, 100 + k), draws);
      CHECK(tv < 0.02);
    }
  }
  // Low-rank kernel: subsets beyond the rank never appear.
  const SymMatrix low(oracle::random_psd(6, 2, gen));
  const auto counts = draw_counts(low, 2, 20000, 37);
  CHECK(dpp::total_variation(dpp::kdpp_prob_bruteforce(low, 2), counts, 20000) < 0.03);
}

TEST_CASE("total_variation") {
  dpp::SubsetDistribution exact{{IndexSet({0}), 0.5}, {IndexSet({1}), 0.5}};
  std::map<IndexSet, long long> counts{{IndexSet({0}), 3}, {IndexSet({1}), 1}};
  CHECK(dpp::total_variation(exact, counts, 4) == doctest::Approx(0.25));
  counts = {{IndexSet({2}), 4}};
  CHECK(dpp::total_variation(exact, counts, 4) == doctest::Approx(1.0));
}
