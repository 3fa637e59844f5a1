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

#include <Eigen/Eigenvalues>

#include "dcrit/errors.hpp"
#include "dcrit/linalg.hpp"
#include "support/oracles.hpp"

using dcrit::linalg::SymMatrix;
namespace la = dcrit::linalg;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Best Frobenius distance from s to a 2x2 PSD matrix P = C C^T, C lower
// triangular, by coarse-to-fine grid search over C.
double grid_psd_distance(const Eigen::Matrix2d& s) {
  double best = 1e300;
  double c11 = 0.0, c21 = 0.0, c22 = 0.0;
  auto eval = [&](double a, double b, double c) {
    Eigen::Matrix2d low;
    low << a, 0.0, b, c;
    return (s - low * low.transpose()).norm();
  };
  double step = 0.05;
  double lo11 = 0.0, hi11 = 2.5, lo21 = -2.5, hi21 = 2.5, lo22 = 0.0, hi22 = 2.5;
  for (int level = 0; level < 5; ++level) {
    for (double a = lo11; a <= hi11 + 1e-12; a += step) {
      for (double b = lo21; b <= hi21 + 1e-12; b += step) {
        for (double c = lo22; c <= hi22 + 1e-12; c += step) {
          const double d = eval(a, b, c);
          if (d < best) {
            best = d;
            c11 = a;
            c21 = b;
            c22 = c;
          }
        }
      }
    }
    lo11 = std::max(0.0, c11 - 2 * step);
    hi11 = c11 + 2 * step;
    lo21 = c21 - 2 * step;
    hi21 = c21 + 2 * step;
    lo22 = std::max(0.0, c22 - 2 * step);
    hi22 = c22 + 2 * step;
    step /= 5.0;
  }
  return best;
}

}  // namespace

TEST_CASE("SymMatrix validates shape, finiteness and symmetry") {
  CHECK_THROWS_AS(SymMatrix(Eigen::MatrixXd(2, 3)), dcrit::ValidationError);
  CHECK_THROWS_AS(SymMatrix(Eigen::MatrixXd(0, 0)), dcrit::ValidationError);
  CHECK_THROWS_AS((SymMatrix{{1.0, 2.0}, {2.1, 1.0}}), dcrit::ValidationError);
  CHECK_THROWS_AS((SymMatrix{{1.0, NAN}, {NAN, 1.0}}), dcrit::ValidationError);
  CHECK_NOTHROW((SymMatrix{{1.0, 2.0}, {2.0 + 1e-13, 1.0}}));
  const SymMatrix s = SymMatrix::symmetrize((Eigen::Matrix2d() << 1, 2, 4, 1).finished());
  CHECK(s(0, 1) == 3.0);
}

TEST_CASE("eigh: identity, 2x2 and diagonal examples") {
  const auto id = la::eigh(SymMatrix::identity(3));
  CHECK(max_abs(id.eigenvalues - Eigen::Vector3d::Ones()) < 1e-14);
  CHECK(max_abs(id.eigenvectors.transpose() * id.eigenvectors - Eigen::Matrix3d::Identity()) < 1e-12);

  const auto e = la::eigh(SymMatrix{{1, 2}, {2, 1}});
  CHECK(e.eigenvalues(0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(e.eigenvalues(1) == doctest::Approx(3.0).epsilon(1e-14));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(e.eigenvectors.col(0).dot(Eigen::Vector2d(r, -r))) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(e.eigenvectors.col(1).dot(Eigen::Vector2d(r, r))) - 1.0) < 1e-12);

  const std::vector<double> diag{5.0, -2.0, 0.0};
  const auto d = la::eigh(SymMatrix::diagonal(diag));
  CHECK(d.eigenvalues(0) == -2.0);
  CHECK(d.eigenvalues(1) == 0.0);
  CHECK(d.eigenvalues(2) == 5.0);
  CHECK(max_abs(d.eigenvectors.cwiseAbs() - (Eigen::Matrix3d() << 0, 0, 1, 1, 0, 0, 0, 1, 0).finished()) < 1e-14);
}

TEST_CASE("eigh property: 1000 random symmetric matrices, n <= 16, entries in [-10, 10]") {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> size(1, 16);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(gen);
    const Eigen::MatrixXd a = oracle::random_symmetric(n, gen, -10.0, 10.0);
    const auto e = la::eigh(SymMatrix(a));
    REQUIRE(max_abs(e.eigenvectors.transpose() * e.eigenvectors - Eigen::MatrixXd::Identity(n, n)) <= 1e-10);
    REQUIRE(max_abs(e.reconstruct() - a) <= 1e-8 * (1.0 + max_abs(a)));
    for (int i = 1; i < n; ++i) REQUIRE(e.eigenvalues(i - 1) <= e.eigenvalues(i));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
    REQUIRE(max_abs(e.eigenvalues - ref.eigenvalues()) <= 1e-9 * (1.0 + max_abs(a)));
  }
}

TEST_CASE("eigh is deterministic and reports non-convergence") {
  std::mt19937_64 gen(5);
  const SymMatrix s(oracle::random_symmetric(8, gen));
  const auto a = la::eigh(s);
  const auto b = la::eigh(s);
  CHECK(a.eigenvalues == b.eigenvalues);
  CHECK(a.eigenvectors == b.eigenvectors);
  CHECK_THROWS_AS(la::eigh(s, {.max_sweeps = 1, .off_diagonal_tol = 1e-12}), dcrit::NumericError);
}

TEST_CASE("nearest_psd examples") {
  const SymMatrix psd{{2, 1}, {1, 2}};
  CHECK(la::nearest_psd(psd).matrix() == psd.matrix());
  const auto p = la::nearest_psd(SymMatrix{{1, 2}, {2, 1}});
  CHECK(max_abs(p.matrix() - Eigen::Matrix2d::Constant(1.5)) < 1e-12);
  const std::vector<double> diag{-1.0, 4.0};
  const auto q = la::nearest_psd(SymMatrix::diagonal(diag));
  CHECK(max_abs(q.matrix() - (Eigen::Matrix2d() << 0, 0, 0, 4).finished()) < 1e-12);
}

TEST_CASE("nearest_psd property: PSD, spectral form, idempotent") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd a = oracle::random_symmetric(10, gen, -5.0, 5.0);
    const auto p = la::nearest_psd(SymMatrix(a));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
    const Eigen::MatrixXd expected =
        ref.eigenvectors() * ref.eigenvalues().cwiseMax(0.0).asDiagonal() * ref.eigenvectors().transpose();
    REQUIRE(max_abs(p.matrix() - expected) <= 1e-10 * (1.0 + max_abs(a)));
    REQUIRE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.matrix()).eigenvalues().minCoeff() >= -1e-10);
    REQUIRE(max_abs(la::nearest_psd(p).matrix() - p.matrix()) <= 1e-10);
  }
}

TEST_CASE("nearest_psd is Frobenius-optimal for 2x2 inputs (grid oracle)") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Matrix2d s = oracle::random_symmetric(2, gen, -2.0, 2.0);
    const double ours = (s - la::nearest_psd(SymMatrix(s)).matrix()).norm();
    const double grid = grid_psd_distance(s);
    CHECK(ours <= grid + 1e-3);
    CHECK(grid >= ours - 1e-3);
  }
}

TEST_CASE("determinant and principal minors against Laplace expansion") {
  CHECK(la::determinant(Eigen::MatrixXd::Identity(4, 4)) == doctest::Approx(1.0));
  const SymMatrix s{{1, .5, 0}, {.5, 1, 0}, {0, 0, 1}};
  const std::vector<int> i01{0, 1};
  CHECK(la::principal_minor_det(s, i01) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(la::principal_minor_det(SymMatrix::identity(4), std::vector<int>{0, 2}) == 1.0);
  CHECK(la::principal_minor_det(s, std::vector<int>{}) == 1.0);
  CHECK_THROWS_AS(la::principal_minor_det(s, std::vector<int>{1, 0}), dcrit::ValidationError);
  CHECK_THROWS_AS(la::principal_minor_det(s, std::vector<int>{0, 3}), dcrit::ValidationError);
  CHECK_THROWS_AS(la::principal_minor_det(s, std::vector<int>{1, 1}), dcrit::ValidationError);

  std::mt19937_64 gen(14);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 8;
    const Eigen::MatrixXd a = oracle::random_symmetric(n, gen, -3.0, 3.0);
    const SymMatrix sa(a);
    for (std::uint32_t mask = 0; mask < (1u << n); mask += 1 + trial % 5) {
      const auto idx = oracle::bits_to_set(mask, n);
      const double expected = oracle::det_laplace(oracle::submatrix(a, idx));
      REQUIRE(std::abs(la::principal_minor_det(sa, idx) - expected) <= 1e-9 * (1.0 + std::abs(expected)));
    }
  }
}

TEST_CASE("determinant expansion identity") {
  const auto trivial = la::det_sum_identity_check(SymMatrix::identity(3), SymMatrix::zeros(3));
  CHECK(trivial.lhs == doctest::Approx(1.0));
  CHECK(trivial.rhs == doctest::Approx(1.0));

  std::mt19937_64 gen(15);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    std::vector<double> diag(static_cast<std::size_t>(n));
    for (auto& v : diag) v = u(gen);
    const Eigen::MatrixXd m = oracle::random_symmetric(n, gen, -2.0, 2.0);
    const auto r = la::det_sum_identity_check(SymMatrix::diagonal(diag), SymMatrix(m));
    Eigen::MatrixXd dm = m;
    for (int i = 0; i < n; ++i) dm(i, i) += diag[static_cast<std::size_t>(i)];
    const double truth = oracle::det_laplace(dm);
    const double scale = std::max(1.0, std::abs(truth));
    REQUIRE(std::abs(r.lhs - truth) <= 1e-8 * scale);
    REQUIRE(std::abs(r.rhs - truth) <= 1e-8 * scale);
  }
  // D = I: det(I + M) equals the sum of all principal minors of M.
  const Eigen::MatrixXd m = oracle::random_psd(5, 5, gen);
  const auto r = la::det_sum_identity_check(SymMatrix::identity(5), SymMatrix(m));
  double minors = 0.0;
  for (std::uint32_t mask = 0; mask < 32; ++mask) {
    minors += oracle::det_laplace(oracle::submatrix(m, oracle::bits_to_set(mask, 5)));
  }
  CHECK(std::abs(r.rhs - minors) <= 1e-8 * minors);
  CHECK(std::abs(r.lhs - minors) <= 1e-8 * minors);

  CHECK_THROWS_AS(la::det_sum_identity_check(SymMatrix{{1, 1}, {1, 1}}, SymMatrix::zeros(2)),
                  dcrit::ValidationError);
  CHECK_THROWS_AS(la::det_sum_identity_check(SymMatrix::identity(13), SymMatrix::zeros(13)),
                  dcrit::ValidationError);
}
