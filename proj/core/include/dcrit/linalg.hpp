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

#ifndef DCRIT_LINALG_HPP_
#define DCRIT_LINALG_HPP_

#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dcrit::linalg {

// Real symmetric matrix. Symmetry is checked on construction with tolerance
// 1e-12 * max(1, |a_ij|); the stored entries are left exactly as given.
class SymMatrix {
 public:
  explicit SymMatrix(Eigen::MatrixXd data);
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static SymMatrix identity(int n);
  static SymMatrix zeros(int n);
  static SymMatrix diagonal(std::span<const double> diag);
  // Averages (A + A^T)/2; for inputs that are symmetric up to round-off.
  static SymMatrix symmetrize(const Eigen::MatrixXd& a);

  int size() const { return static_cast<int>(data_.rows()); }
  double operator()(int i, int j) const { return data_(i, j); }
  const Eigen::MatrixXd& matrix() const { return data_; }

 private:
  Eigen::MatrixXd data_;
};

// Eigenvalues ascending; eigenvectors are the matching columns.
struct EigenDecomp {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  Eigen::MatrixXd reconstruct() const;
};

// Cyclic Jacobi eigensolver. Throws NumericError if the off-diagonal mass is
// still above threshold after the sweep cap.
struct JacobiOptions {
  int max_sweeps = 30;
  double off_diagonal_tol = 1e-12;
};
EigenDecomp eigh(const SymMatrix& s, const JacobiOptions& opts = {});

// Nearest PSD matrix in Frobenius norm: V diag(max(lambda, 0)) V^T.
// Returns the input unchanged when its smallest eigenvalue is >= -psd_tol.
SymMatrix nearest_psd(const SymMatrix& s, double psd_tol = 1e-10);

// Determinant of a general square matrix via LU with partial pivoting.
double determinant(const Eigen::MatrixXd& a);

// det of the principal submatrix on `idx` (sorted, distinct). Empty -> 1.
double principal_minor_det(const SymMatrix& s, std::span<const int> idx);

struct DetSumCheck {
  double lhs;  // det(D + M)
  double rhs;  // sum_S det(M_S) * prod_{i not in S} D_ii
};

// Expansion of det(D + M) over all 2^n principal minors of M, for diagonal D.
// Test oracle only; n <= 12.
DetSumCheck det_sum_identity_check(const SymMatrix& d, const SymMatrix& m);

}  // namespace dcrit::linalg

#endif  // DCRIT_LINALG_HPP_
