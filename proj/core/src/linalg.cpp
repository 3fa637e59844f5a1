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

#include "dcrit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dcrit/errors.hpp"

namespace dcrit::linalg {

namespace {

void check_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() < 1 || a.rows() != a.cols()) {
    throw ValidationError("SymMatrix: expected a non-empty square matrix");
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      if (!std::isfinite(a(i, j)) || !std::isfinite(a(j, i))) {
        throw ValidationError("SymMatrix: non-finite entry");
      }
      const double scale = std::max(1.0, std::abs(a(i, j)));
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale) {
        std::ostringstream msg;
        msg << "SymMatrix: entries (" << i << "," << j << ") and (" << j << ","
            << i << ") differ: " << a(i, j) << " vs " << a(j, i);
        throw ValidationError(msg.str());
      }
    }
    if (!std::isfinite(a(i, i))) throw ValidationError("SymMatrix: non-finite entry");
  }
}

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (i != j) sum += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(sum);
}

}  // namespace

SymMatrix::SymMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
  check_symmetric(data_);
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  data_.resize(n, n);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != n) {
      throw ValidationError("SymMatrix: ragged initializer");
    }
    Eigen::Index j = 0;
    for (double v : row) data_(i, j++) = v;
    ++i;
  }
  check_symmetric(data_);
}

SymMatrix SymMatrix::identity(int n) {
  return SymMatrix(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix SymMatrix::zeros(int n) { return SymMatrix(Eigen::MatrixXd::Zero(n, n)); }

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  const auto n = static_cast<Eigen::Index>(diag.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag[static_cast<std::size_t>(i)];
  return SymMatrix(std::move(m));
}

SymMatrix SymMatrix::symmetrize(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ValidationError("symmetrize: matrix not square");
  return SymMatrix(Eigen::MatrixXd(0.5 * (a + a.transpose())));
}

Eigen::MatrixXd EigenDecomp::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

EigenDecomp eigh(const SymMatrix& s, const JacobiOptions& opts) {
  const int n = s.size();
  Eigen::MatrixXd a = s.matrix();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  const double scale = a.norm();
  const double threshold = opts.off_diagonal_tol * (scale > 0.0 ? scale : 1.0);

  double off = off_diagonal_norm(a);
  int sweep = 0;
  while (off > threshold) {
    if (sweep == opts.max_sweeps) {
      std::ostringstream msg;
      msg << "eigh: Jacobi did not converge after " << opts.max_sweeps
          << " sweeps; off-diagonal residual " << off;
      throw NumericError(msg.str());
    }
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = c * arp - sn * arq;
          a(r, q) = a(q, r) = sn * arp + c * arq;
        }
        for (int r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - sn * vrq;
          v(r, q) = sn * vrp + c * vrq;
        }
      }
    }
    ++sweep;
    off = off_diagonal_norm(a);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) < a(j, j); });

  EigenDecomp out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k) {
    const int src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    out.eigenvectors.col(k) = v.col(src);
  }
  return out;
}

SymMatrix nearest_psd(const SymMatrix& s, double psd_tol) {
  const EigenDecomp ed = eigh(s);
  if (ed.eigenvalues.minCoeff() >= -psd_tol) return s;
  const Eigen::VectorXd clipped = ed.eigenvalues.cwiseMax(0.0);
  const Eigen::MatrixXd projected =
      ed.eigenvectors * clipped.asDiagonal() * ed.eigenvectors.transpose();
  return SymMatrix::symmetrize(projected);
}

double determinant(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ValidationError("determinant: matrix not square");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd lu = a;
  double det = 1.0;
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::abs(lu(r, col)) > std::abs(lu(pivot, col))) pivot = r;
    }
    if (lu(pivot, col) == 0.0) return 0.0;
    if (pivot != col) {
      lu.row(pivot).swap(lu.row(col));
      det = -det;
    }
    const double diag = lu(col, col);
    det *= diag;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double factor = lu(r, col) / diag;
      if (factor == 0.0) continue;
      lu.row(r).tail(n - col - 1) -= factor * lu.row(col).tail(n - col - 1);
    }
  }
  return det;
}

double principal_minor_det(const SymMatrix& s, std::span<const int> idx) {
  const int n = s.size();
  for (std::size_t t = 0; t < idx.size(); ++t) {
    if (idx[t] < 0 || idx[t] >= n) {
      throw ValidationError("principal_minor_det: index " + std::to_string(idx[t]) +
                            " out of range for n = " + std::to_string(n));
    }
    if (t > 0 && idx[t] <= idx[t - 1]) {
      throw ValidationError("principal_minor_det: indices must be sorted and distinct");
    }
  }
  const auto& m = s.matrix();
  switch (idx.size()) {
    case 0:
      return 1.0;
    case 1:
      return m(idx[0], idx[0]);
    case 2: {
      const int i = idx[0], j = idx[1];
      return m(i, i) * m(j, j) - m(i, j) * m(j, i);
    }
    case 3: {
      const int i = idx[0], j = idx[1], k = idx[2];
      return m(i, i) * (m(j, j) * m(k, k) - m(j, k) * m(k, j)) -
             m(i, j) * (m(j, i) * m(k, k) - m(j, k) * m(k, i)) +
             m(i, k) * (m(j, i) * m(k, j) - m(j, j) * m(k, i));
    }
    default:
      break;
  }
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = m(idx[r], idx[c]);
  }
  return determinant(sub);
}

DetSumCheck det_sum_identity_check(const SymMatrix& d, const SymMatrix& m) {
  const int n = d.size();
  if (m.size() != n) throw ValidationError("det_sum_identity_check: size mismatch");
  if (n > 12) {
    throw ValidationError("det_sum_identity_check: n = " + std::to_string(n) +
                          " exceeds enumeration limit 12");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && d(i, j) != 0.0) {
        throw ValidationError("det_sum_identity_check: D must be diagonal");
      }
    }
  }

  DetSumCheck out{};
  out.lhs = determinant(d.matrix() + m.matrix());

  double rhs = 0.0;
  std::vector<int> subset;
  subset.reserve(static_cast<std::size_t>(n));
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    subset.clear();
    double rest = 1.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        subset.push_back(i);
      } else {
        rest *= d(i, i);
      }
    }
    rhs += principal_minor_det(m, subset) * rest;
  }
  out.rhs = rhs;
  return out;
}

}  // namespace dcrit::linalg
