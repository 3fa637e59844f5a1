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

#include "dcrit/dpp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

#include "dcrit/errors.hpp"

namespace dcrit::dpp {

IndexSet::IndexSet(std::vector<int> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (members_[i] < 0) throw ValidationError("IndexSet: negative index");
    if (i > 0 && members_[i] == members_[i - 1]) {
      throw ValidationError("IndexSet: duplicate index " + std::to_string(members_[i]));
    }
  }
}

IndexSet IndexSet::range(int n) {
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  return IndexSet(std::move(all));
}

bool IndexSet::contains(int i) const {
  return std::binary_search(members_.begin(), members_.end(), i);
}

std::string IndexSet::to_string(char sep) const {
  std::string out;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += std::to_string(members_[i]);
  }
  return out;
}

ElemSymTable elementary_symmetric(std::span<const double> lambda, int k_max) {
  const int n = static_cast<int>(lambda.size());
  if (k_max < 0 || k_max > n) {
    throw ValidationError("elementary_symmetric: need 0 <= k_max <= N");
  }
  ElemSymTable t;
  t.values = Eigen::MatrixXd::Zero(k_max + 1, n + 1);
  t.values.row(0).setOnes();
  for (int l = 1; l <= k_max; ++l) {
    for (int m = l; m <= n; ++m) {
      t.values(l, m) = t.values(l, m - 1) + lambda[static_cast<std::size_t>(m - 1)] *
                                                 t.values(l - 1, m - 1);
    }
  }
  return t;
}

ElemSymTable elementary_symmetric(const Eigen::VectorXd& lambda, int k_max) {
  return elementary_symmetric(std::span<const double>(lambda.data(), lambda.size()), k_max);
}

KDppSampler::KDppSampler(const linalg::SymMatrix& l, int k) : k_(k) {
  const int n = l.size();
  if (k < 1) throw ValidationError("kdpp: k must be at least 1");
  if (k > n) {
    throw KernelRankError("insufficient kernel rank: k = " + std::to_string(k) +
                          " exceeds N = " + std::to_string(n));
  }
  const linalg::EigenDecomp ed = linalg::eigh(l);
  if (ed.eigenvalues.minCoeff() < -kPsdTolerance) {
    std::ostringstream msg;
    msg << "kdpp: kernel is not PSD (min eigenvalue " << ed.eigenvalues.minCoeff()
        << "); project it with nearest_psd first";
    throw ValidationError(msg.str());
  }
  eigenvalues_ = ed.eigenvalues.unaryExpr([](double v) { return v < kEigenClamp ? 0.0 : v; });
  eigenvectors_ = ed.eigenvectors;
  table_ = elementary_symmetric(eigenvalues_, k);
  const double normalizer = table_(k, n);
  if (!(normalizer > kMinNormalizer)) {
    std::ostringstream msg;
    msg << "insufficient kernel rank: e_" << k << "(lambda) = " << normalizer;
    throw KernelRankError(msg.str());
  }
}

std::vector<int> KDppSampler::select_eigenvectors(SeededRng& rng) const {
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(k_));
  int remaining = k_;
  for (int m = n(); m >= 1 && remaining > 0; --m) {
    bool take;
    if (remaining == m) {
      // e_l[m-1] = 0 for l > m - 1, so inclusion is certain.
      take = true;
    } else {
      const double p = eigenvalues_(m - 1) * table_(remaining - 1, m - 1) /
                       table_(remaining, m);
      take = rng.uniform() < p;
    }
    if (take) {
      chosen.push_back(m - 1);
      --remaining;
    }
  }
  std::reverse(chosen.begin(), chosen.end());
  return chosen;
}

IndexSet KDppSampler::project(const std::vector<int>& eig_idx, SeededRng& rng) const {
  const Eigen::Index n = eigenvectors_.rows();
  std::vector<Eigen::VectorXd> basis;
  basis.reserve(eig_idx.size());
  for (int j : eig_idx) basis.emplace_back(eigenvectors_.col(j));

  std::vector<int> items;
  items.reserve(eig_idx.size());
  Eigen::VectorXd mass(n);
  while (!basis.empty()) {
    mass.setZero();
    for (const auto& v : basis) mass += v.cwiseAbs2();
    const double total = mass.sum();
    if (!(total >= kMinResidualMass)) {
      std::ostringstream msg;
      msg << "kdpp: residual coordinate mass " << total << " underflowed with "
          << basis.size() << " items left to draw";
      throw NumericError(msg.str());
    }
    const double u = rng.uniform() * total;
    Eigen::Index item = n - 1;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += mass(i);
      if (u < acc) {
        item = i;
        break;
      }
    }
    while (mass(item) == 0.0 && item > 0) --item;
    items.push_back(static_cast<int>(item));

    // Eliminate coordinate `item` from the span using the vector with the
    // largest entry there, then re-orthonormalize.
    std::size_t pivot = 0;
    for (std::size_t j = 1; j < basis.size(); ++j) {
      if (std::abs(basis[j](item)) > std::abs(basis[pivot](item))) pivot = j;
    }
    const Eigen::VectorXd pv = basis[pivot];
    basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(pivot));
    for (auto& v : basis) v -= (v(item) / pv(item)) * pv;

    // Modified Gram-Schmidt.
    for (std::size_t j = 0; j < basis.size(); ++j) {
      for (std::size_t i = 0; i < j; ++i) basis[j] -= basis[i].dot(basis[j]) * basis[i];
      const double norm = basis[j].norm();
      if (!(norm > 0.0)) {
        throw NumericError("kdpp: projection basis lost rank during orthogonalization");
      }
      basis[j] /= norm;
    }
  }
  return IndexSet(std::move(items));
}

IndexSet KDppSampler::sample(SeededRng& rng) const {
  return project(select_eigenvectors(rng), rng);
}

IndexSet kdpp_sample(const linalg::SymMatrix& l, int k, SeededRng& rng) {
  return KDppSampler(l, k).sample(rng);
}

namespace {

void check_enumerable(const linalg::SymMatrix& l, const char* who) {
  if (l.size() > 12) {
    throw ValidationError(std::string(who) + ": N = " + std::to_string(l.size()) +
                          " exceeds enumeration limit 12");
  }
}

}  // namespace

SubsetDistribution kdpp_prob_bruteforce(const linalg::SymMatrix& l, int k) {
  check_enumerable(l, "kdpp_prob_bruteforce");
  const int n = l.size();
  if (k < 0 || k > n) throw ValidationError("kdpp_prob_bruteforce: need 0 <= k <= N");

  SubsetDistribution out;
  double total = 0.0;
  std::vector<int> subset;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != static_cast<int>(k)) continue;
    subset.clear();
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) subset.push_back(i);
    }
    const double det = linalg::principal_minor_det(l, subset);
    out.emplace(IndexSet(subset), det);
    total += det;
  }
  if (!(total > kMinNormalizer)) {
    throw KernelRankError("insufficient kernel rank: all size-" + std::to_string(k) +
                          " minors vanish");
  }
  for (auto& [set, p] : out) p /= total;
  return out;
}

LEnsembleEnumeration lensemble_prob_bruteforce(const linalg::SymMatrix& l) {
  check_enumerable(l, "lensemble_prob_bruteforce");
  const int n = l.size();
  LEnsembleEnumeration out{};
  std::vector<int> subset;
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    subset.clear();
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) subset.push_back(i);
    }
    const double det = linalg::principal_minor_det(l, subset);
    out.probabilities.emplace(IndexSet(subset), det);
    total += det;
  }
  for (auto& [set, p] : out.probabilities) p /= total;
  out.normalizer = total;
  out.det_identity_plus_l =
      linalg::determinant(Eigen::MatrixXd::Identity(n, n) + l.matrix());
  return out;
}

double total_variation(const SubsetDistribution& exact,
                       const std::map<IndexSet, long long>& counts, long long draws) {
  std::set<IndexSet> keys;
  for (const auto& [k, v] : exact) keys.insert(k);
  for (const auto& [k, v] : counts) keys.insert(k);
  double tv = 0.0;
  for (const auto& key : keys) {
    const auto e = exact.find(key);
    const auto c = counts.find(key);
    const double p = e == exact.end() ? 0.0 : e->second;
    const double q = c == counts.end()
                         ? 0.0
                         : static_cast<double>(c->second) / static_cast<double>(draws);
    tv += std::abs(p - q);
  }
  return 0.5 * tv;
}

}  // namespace dcrit::dpp
