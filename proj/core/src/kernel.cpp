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

#include "dcrit/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcrit/errors.hpp"

namespace dcrit::kernel {

namespace {

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& x) {
  return x.rowwise() - x.colwise().mean();
}

// H A H without forming H.
Eigen::MatrixXd double_center(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd c = a.rowwise() - a.colwise().mean();
  return c.colwise() - c.rowwise().mean();
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

ActivationMatrix::ActivationMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
  if (data_.rows() < 2) {
    throw ValidationError("ActivationMatrix: need at least 2 rows, got " +
                          std::to_string(data_.rows()));
  }
  if (data_.cols() < 1) throw ValidationError("ActivationMatrix: need at least 1 column");
  if (!data_.allFinite()) throw ValidationError("ActivationMatrix: non-finite entry");
}

ActivationMatrix ActivationMatrix::column(std::span<const double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = values[i];
  }
  return ActivationMatrix(std::move(m));
}

SimilarityMatrix::SimilarityMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
    throw ValidationError("SimilarityMatrix: expected a non-empty square matrix");
  }
  const Eigen::Index n = entries_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    entries_(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (!std::isfinite(entries_(i, j)) || entries_(i, j) != entries_(j, i)) {
        throw ValidationError("SimilarityMatrix: entries must be finite and symmetric");
      }
      entries_(i, j) = entries_(j, i) = clamp_unit(entries_(i, j));
    }
  }
}

double SimilarityMatrix::mean_off_diagonal() const {
  const Eigen::Index n = entries_.rows();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) sum += entries_(i, j);
  }
  return sum / static_cast<double>(n * (n - 1) / 2);
}

linalg::SymMatrix gram(const ActivationMatrix& x, const KernelSpec& spec) {
  const Eigen::MatrixXd& data = x.matrix();
  if (spec.kind == KernelKind::kLinear) {
    return linalg::SymMatrix::symmetrize(data * data.transpose());
  }
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
    throw ValidationError("gram: rbf bandwidth must be positive, got " +
                          std::to_string(spec.sigma));
  }
  const Eigen::Index n = data.rows();
  const double inv_two_sigma_sq = 1.0 / (2.0 * spec.sigma * spec.sigma);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dist_sq = (data.row(i) - data.row(j)).squaredNorm();
      a(i, j) = a(j, i) = std::exp(-dist_sq * inv_two_sigma_sq);
    }
  }
  return linalg::SymMatrix(std::move(a));
}

double hsic(const linalg::SymMatrix& a, const linalg::SymMatrix& b) {
  if (a.size() != b.size()) {
    throw ValidationError("hsic: size mismatch " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  const int n = a.size();
  if (n < 2) throw ValidationError("hsic: need n >= 2");
  // Tr(HAH B) = <HAH, B>_F because B is symmetric.
  const double trace = double_center(a.matrix()).cwiseProduct(b.matrix()).sum();
  const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
  return trace / denom;
}

double cka(const ActivationMatrix& x, const ActivationMatrix& y, const KernelSpec& spec) {
  if (x.rows() != y.rows()) {
    throw ValidationError("cka: row-count mismatch " + std::to_string(x.rows()) +
                          " vs " + std::to_string(y.rows()));
  }
  const int n = x.rows();
  const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);

  if (spec.kind == KernelKind::kLinear && x.cols() < n && y.cols() < n) {
    // Feature-space form: ||Yc^T Xc||_F^2 / (||Xc^T Xc||_F ||Yc^T Yc||_F).
    const Eigen::MatrixXd xc = center_columns(x.matrix());
    const Eigen::MatrixXd yc = center_columns(y.matrix());
    const double xx = (xc.transpose() * xc).norm();
    const double yy = (yc.transpose() * yc).norm();
    if (xx * xx / denom < kDegenerateHsic || yy * yy / denom < kDegenerateHsic) {
      return 0.0;
    }
    const double xy = (yc.transpose() * xc).squaredNorm();
    return clamp_unit(xy / (xx * yy));
  }

  const linalg::SymMatrix a = gram(x, spec);
  const linalg::SymMatrix b = gram(y, spec);
  const double hab = hsic(a, b);
  const double haa = hsic(a, a);
  const double hbb = hsic(b, b);
  if (haa < kDegenerateHsic || hbb < kDegenerateHsic) return 0.0;
  const double value = hab / std::sqrt(haa * hbb);
  return spec.kind == KernelKind::kLinear ? clamp_unit(value) : value;
}

SimilarityMatrix build_similarity(std::span<const Eigen::VectorXd> outputs) {
  const auto members = static_cast<Eigen::Index>(outputs.size());
  if (members < 2) throw ValidationError("build_similarity: need at least 2 members");
  const Eigen::Index batch = outputs[0].size();
  if (batch < 2) throw ValidationError("build_similarity: need batch length >= 2");

  const double denom = static_cast<double>(batch - 1) * static_cast<double>(batch - 1);
  std::vector<Eigen::VectorXd> centered;
  std::vector<double> sq_norm;
  std::vector<bool> degenerate;
  centered.reserve(outputs.size());
  for (const auto& q : outputs) {
    if (q.size() != batch) {
      throw ValidationError("build_similarity: all members need the same batch length");
    }
    if (!q.allFinite()) throw ValidationError("build_similarity: non-finite Q-value");
    centered.emplace_back(q.array() - q.mean());
    const double s = centered.back().squaredNorm();
    sq_norm.push_back(s);
    degenerate.push_back(s * s / denom < kDegenerateHsic);
  }

  Eigen::MatrixXd entries = Eigen::MatrixXd::Identity(members, members);
  for (Eigen::Index i = 0; i < members; ++i) {
    for (Eigen::Index j = i + 1; j < members; ++j) {
      double value = 0.0;
      if (!degenerate[i] && !degenerate[j]) {
        const double dot = centered[i].dot(centered[j]);
        value = (dot * dot) / (sq_norm[i] * sq_norm[j]);
      }
      entries(i, j) = entries(j, i) = value;
    }
  }
  return SimilarityMatrix(std::move(entries));
}

}  // namespace dcrit::kernel
