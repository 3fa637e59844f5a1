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

#include "dcrit/errors.hpp"
#include "dcrit/kernel.hpp"
#include "support/oracles.hpp"

namespace kn = dcrit::kernel;
using dcrit::linalg::SymMatrix;
using kn::ActivationMatrix;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& gen) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = g(gen);
  }
  return m;
}

ActivationMatrix col(std::vector<double> v) { return ActivationMatrix::column(v); }

}  // namespace

TEST_CASE("gram examples") {
  const auto g = kn::gram(ActivationMatrix(Eigen::Matrix2d::Identity()));
  CHECK(g.matrix() == Eigen::MatrixXd(Eigen::Matrix2d::Identity()));
  const auto o = kn::gram(col({1, 2, 3}));
  CHECK(o.matrix() == (Eigen::Matrix3d() << 1, 2, 3, 2, 4, 6, 3, 6, 9).finished());
  const auto r = kn::gram(ActivationMatrix(Eigen::MatrixXd::Constant(4, 3, 0.7)), kn::KernelSpec::rbf(0.5));
  CHECK(r.matrix() == Eigen::MatrixXd::Ones(4, 4));
  CHECK_THROWS_AS(kn::gram(col({1, 2}), kn::KernelSpec::rbf(0.0)), dcrit::ValidationError);
}

TEST_CASE("ActivationMatrix validation") {
  CHECK_THROWS_AS(col({1.0}), dcrit::ValidationError);
  CHECK_THROWS_AS(col({1.0, INFINITY}), dcrit::ValidationError);
  CHECK_THROWS_AS(kn::cka(col({1, 2, 3}), col({1, 2})), dcrit::ValidationError);
}

TEST_CASE("hsic examples and symmetry") {
  const auto a = kn::gram(col({-1, 0, 1}));
  CHECK(kn::hsic(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kn::hsic(a, SymMatrix(Eigen::MatrixXd::Ones(3, 3))) == doctest::Approx(0.0).scale(1.0));
  CHECK(kn::hsic(SymMatrix::zeros(3), SymMatrix::zeros(3)) == 0.0);

  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_matrix(12, 3, gen);
    const auto y = random_matrix(12, 2, gen);
    const auto gx = kn::gram(ActivationMatrix(x));
    const auto gy = kn::gram(ActivationMatrix(y), kn::KernelSpec::rbf(1.3));
    REQUIRE(std::abs(kn::hsic(gx, gy) - kn::hsic(gy, gx)) <= 1e-12);
    REQUIRE(std::abs(kn::hsic(gx, gy) - oracle::hsic(gx.matrix(), gy.matrix())) <= 1e-10);
  }
}

TEST_CASE("cka examples") {
  CHECK(kn::cka(col({1, 2, 3}), col({1, 2, 4})) == doctest::Approx(27.0 / 28.0).epsilon(1e-13));
  std::mt19937_64 gen(22);
  const Eigen::MatrixXd x = random_matrix(20, 4, gen);
  CHECK(std::abs(kn::cka(ActivationMatrix(x), ActivationMatrix(x)) - 1.0) <= 1e-12);
  const Eigen::MatrixXd shifted = (5.0 * x).array() + 7.0;
  CHECK(std::abs(kn::cka(ActivationMatrix(x), ActivationMatrix(shifted)) - 1.0) <= 1e-12);
  CHECK(kn::cka(col({1, 2, 3}), col({4, 4, 4})) == 0.0);
  const double rbf_self = kn::cka(ActivationMatrix(x), ActivationMatrix(x), kn::KernelSpec::rbf(2.0));
  CHECK(rbf_self == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cka property: matches the explicit-centering oracle") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + trial % 30;
    const auto x = random_matrix(n, 1 + trial % 5, gen);
    const auto y = random_matrix(n, 1 + trial % 7, gen);
    REQUIRE(std::abs(kn::cka(ActivationMatrix(x), ActivationMatrix(y)) - oracle::cka_linear(x, y)) <= 1e-10);
  }
}

TEST_CASE("cka property: orthogonal and isotropic-scale invariance") {
  std::mt19937_64 gen(24);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_matrix(64, 8, gen);
    const auto y = random_matrix(64, 8, gen);
    const Eigen::MatrixXd r = oracle::random_orthogonal(8, gen);
    const ActivationMatrix ax(x);
    REQUIRE(std::abs(kn::cka(ax, ActivationMatrix(x * r)) - kn::cka(ax, ax)) <= 1e-8);
    const double base = kn::cka(ax, ActivationMatrix(y));
    for (double c : {1e-3, 1.0, 1e3}) {
      REQUIRE(std::abs(kn::cka(ax, ActivationMatrix(c * y)) - base) <= 1e-10);
    }
  }
}

TEST_CASE("build_similarity examples and invariants") {
  const Eigen::Vector3d q1(1, 2, 3), q2(1, 2, 4);
  const std::vector<Eigen::VectorXd> pair{q1, q2};
  const auto s = kn::build_similarity(pair);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(1, 1) == 1.0);
  CHECK(s(0, 1) == doctest::Approx(27.0 / 28.0).epsilon(1e-13));
  CHECK(s(1, 0) == s(0, 1));

  const std::vector<Eigen::VectorXd> same(4, Eigen::VectorXd(q1));
  CHECK((kn::build_similarity(same).matrix() - Eigen::MatrixXd::Ones(4, 4)).cwiseAbs().maxCoeff() < 1e-12);

  // Mutually orthogonal centered outputs: the identity regime.
  std::mt19937_64 gen(25);
  Eigen::MatrixXd raw = random_matrix(256, 6, gen);
  raw.rowwise() -= raw.colwise().mean();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() * Eigen::MatrixXd::Identity(256, 6);
  std::vector<Eigen::VectorXd> ortho;
  for (int i = 0; i < 6; ++i) ortho.emplace_back(q.col(i));
  const auto so = kn::build_similarity(ortho);
  CHECK((so.matrix() - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 0.05);

  // Degenerate member: CKA 0 off-diagonal, diagonal 1.
  const std::vector<Eigen::VectorXd> degenerate{q1, Eigen::Vector3d::Constant(2.0), q2};
  const auto sd = kn::build_similarity(degenerate);
  CHECK(sd(0, 1) == 0.0);
  CHECK(sd(1, 1) == 1.0);

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Eigen::VectorXd> outs;
    const int n = 2 + trial % 9;
    for (int i = 0; i < n; ++i) outs.emplace_back(random_matrix(16, 1, gen).col(0));
    const auto m = kn::build_similarity(outs);
    REQUIRE((m.matrix() - m.matrix().transpose()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(m.matrix().diagonal() == Eigen::VectorXd::Ones(n));
    REQUIRE(m.matrix().minCoeff() >= 0.0);
    REQUIRE(m.matrix().maxCoeff() <= 1.0);
  }
  CHECK_THROWS_AS(kn::build_similarity(std::vector<Eigen::VectorXd>{q1}), dcrit::ValidationError);
}
