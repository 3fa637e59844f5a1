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

#ifndef DCRIT_KERNEL_HPP_
#define DCRIT_KERNEL_HPP_

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dcrit/linalg.hpp"

namespace dcrit::kernel {

enum class KernelKind { kLinear, kRbf };

struct KernelSpec {
  KernelKind kind = KernelKind::kLinear;
  double sigma = 1.0;  // rbf bandwidth; ignored for linear

  static KernelSpec linear() { return {}; }
  static KernelSpec rbf(double sigma) { return {KernelKind::kRbf, sigma}; }
};

// n examples by p features. Requires n >= 2 and finite entries.
class ActivationMatrix {
 public:
  explicit ActivationMatrix(Eigen::MatrixXd data);
  static ActivationMatrix column(std::span<const double> values);

  int rows() const { return static_cast<int>(data_.rows()); }
  int cols() const { return static_cast<int>(data_.cols()); }
  const Eigen::MatrixXd& matrix() const { return data_; }

 private:
  Eigen::MatrixXd data_;
};

// Pairwise CKA between ensemble members. Diagonal is exactly 1, off-diagonal
// entries are clamped to [0, 1].
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(Eigen::MatrixXd entries);

  int members() const { return static_cast<int>(entries_.rows()); }
  double operator()(int i, int j) const { return entries_(i, j); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  linalg::SymMatrix as_sym() const { return linalg::SymMatrix(entries_); }

  // Mean over i != j.
  double mean_off_diagonal() const;

 private:
  Eigen::MatrixXd entries_;
};

// HSIC(A, A) below this counts as a constant representation.
inline constexpr double kDegenerateHsic = 1e-12;

linalg::SymMatrix gram(const ActivationMatrix& x, const KernelSpec& spec = {});

// Biased empirical HSIC: Tr(A H B H) / (n - 1)^2.
double hsic(const linalg::SymMatrix& a, const linalg::SymMatrix& b);

// Returns 0 when either side is degenerate.
double cka(const ActivationMatrix& x, const ActivationMatrix& y,
           const KernelSpec& spec = {});

// Linear-kernel CKA between every pair of per-member output vectors, all of
// the same length >= 2.
SimilarityMatrix build_similarity(std::span<const Eigen::VectorXd> outputs);

}  // namespace dcrit::kernel

#endif  // DCRIT_KERNEL_HPP_
