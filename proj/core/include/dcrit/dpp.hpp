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

#ifndef DCRIT_DPP_HPP_
#define DCRIT_DPP_HPP_

#include <compare>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcrit/linalg.hpp"
#include "dcrit/rng.hpp"

namespace dcrit::dpp {

// Sorted set of distinct item indices.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<int> members);  // sorts; rejects duplicates/negatives
  static IndexSet range(int n);                 // {0..n-1}

  int size() const { return static_cast<int>(members_.size()); }
  bool empty() const { return members_.empty(); }
  bool contains(int i) const;
  const std::vector<int>& members() const { return members_; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  std::string to_string(char sep = ';') const;

  friend auto operator<=>(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<int> members_;
};

// values(l, m) = e_l(lambda_1..lambda_m).
struct ElemSymTable {
  Eigen::MatrixXd values;  // (k_max + 1) x (N + 1)

  int k_max() const { return static_cast<int>(values.rows()) - 1; }
  int n() const { return static_cast<int>(values.cols()) - 1; }
  double operator()(int l, int m) const { return values(l, m); }
};

ElemSymTable elementary_symmetric(std::span<const double> lambda, int k_max);
ElemSymTable elementary_symmetric(const Eigen::VectorXd& lambda, int k_max);

// Eigenvalues below this are treated as exact zeros.
inline constexpr double kEigenClamp = 1e-12;
// Kernels with a smaller eigenvalue are rejected as non-PSD.
inline constexpr double kPsdTolerance = 1e-8;
// e_k at or below this means the kernel cannot support k items.
inline constexpr double kMinNormalizer = 1e-300;
// Phase-2 residual mass below this aborts the draw.
inline constexpr double kMinResidualMass = 1e-14;

// Exact k-DPP sampler over a PSD L-ensemble kernel: eigenvector selection by
// the elementary symmetric recursion, then projection-DPP sampling.
// Immutable after construction; each draw takes its own RNG.
class KDppSampler {
 public:
  KDppSampler(const linalg::SymMatrix& l, int k);

  int n() const { return static_cast<int>(eigenvalues_.size()); }
  int k() const { return k_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const ElemSymTable& table() const { return table_; }

  IndexSet sample(SeededRng& rng) const;

  // Phase 1 on its own: indices of the chosen eigenvectors (always k of them).
  std::vector<int> select_eigenvectors(SeededRng& rng) const;

 private:
  IndexSet project(const std::vector<int>& eig_idx, SeededRng& rng) const;

  int k_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  ElemSymTable table_;
};

IndexSet kdpp_sample(const linalg::SymMatrix& l, int k, SeededRng& rng);

using SubsetDistribution = std::map<IndexSet, double>;

// Enumerates every size-k principal minor. N <= 12.
SubsetDistribution kdpp_prob_bruteforce(const linalg::SymMatrix& l, int k);

struct LEnsembleEnumeration {
  SubsetDistribution probabilities;  // over all 2^N subsets, including {}
  double normalizer;                 // sum of all principal minors
  double det_identity_plus_l;        // det(I + L), computed independently
};

// Unconstrained L-ensemble probabilities by enumeration. N <= 12.
LEnsembleEnumeration lensemble_prob_bruteforce(const linalg::SymMatrix& l);

// Total-variation distance between an empirical count table and exact
// probabilities (missing keys count as zero).
double total_variation(const SubsetDistribution& exact,
                       const std::map<IndexSet, long long>& counts, long long draws);

}  // namespace dcrit::dpp

#endif  // DCRIT_DPP_HPP_
