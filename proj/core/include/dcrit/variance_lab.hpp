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

#ifndef DCRIT_VARIANCE_LAB_HPP_
#define DCRIT_VARIANCE_LAB_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcrit/linalg.hpp"

namespace dcrit::variance_lab {

// Z_i = X_i + c Y_i (d - X_i), X_i ~ U(a, b) independent, Y_i ~ Bernoulli(p_i).
// X_i models a critic's pre-update estimate, Y_i whether it was selected for
// the update, c the step size and d the shared target.
struct VarianceModel {
  double a = -1.0;
  double b = 1.0;
  double c = 0.5;
  double d = 0.2;
  double p_i = 0.5;
  double p_ij = 0.25;  // P(Y_i = 1, Y_j = 1)
  int members = 2;     // M

  // a < d < b, 0 < c < 1, Frechet bounds max(0, 2p_i - 1) <= p_ij <= p_i.
  void validate() const;

  double x_mean() const { return 0.5 * (a + b); }
  // Support of Z given Y = 1.
  double updated_lo() const { return d * c + a * (1.0 - c); }
  double updated_hi() const { return d * c + b * (1.0 - c); }
};

double z_mean(const VarianceModel& m);
double z_variance(const VarianceModel& m);
double z_cdf(const VarianceModel& m, double z);

// CDF of min(Z_i, Z_j) from the joint law of (Y_i, Y_j) with P(both) = p_ij.
double z_min_cdf(const VarianceModel& m, double z);

// The product form 2F(z) - F_{i|j}(z) F(z), where F_{i|j} is the mixture
// CDF with weight p_{i|j} = p_ij / p_i, written with the ramp function
// beta(z, theta, alpha). Coincides with z_min_cdf when p_ij = p_i^2.
double z_min_cdf_product_form(const VarianceModel& m, double z);

enum class MinCdfForm { kJoint, kProductForm };

struct Moments {
  double mean;
  double variance;
};

// Mean and variance of min(Z_i, Z_j) by trapezoidal integration of 1 - F
// over the support on `intervals` panels.
Moments min_moments_from_cdf(const VarianceModel& m, MinCdfForm form = MinCdfForm::kJoint,
                             int intervals = 100000);

// Var of the two-member average: psi + phi (p_ij - p_i^2) with
// psi = Var(Z)/2 and phi = k (c (d - E X))^2. The covariance of two members
// is (c (d - E X))^2 (p_ij - p_i^2); averaging two members gives k = 1/2.
// k = 1/4 is the alternative convention; both are reported.
struct AvgVarianceClosedForm {
  double psi;
  double phi_half;     // k = 1/2
  double phi_quarter;  // k = 1/4
  double var_avg_half;
  double var_avg_quarter;
};
AvgVarianceClosedForm avg_variance_closed_form(const VarianceModel& m);

// How the update indicators of the M members are drawn.
struct Independent {};
struct PairCoupled {
  double p_ij;  // joint probability for a two-member ensemble
};
struct KdppDriven {
  linalg::SymMatrix kernel;  // over N >= M items; members are items 0..M-1
  int k;
};
using Coupling = std::variant<Independent, PairCoupled, KdppDriven>;

struct McOptions {
  long n_draws = 1000000;
  std::uint64_t seed = 0;
  int threads = 1;
  int groups = 100;  // jackknife groups; also the unit of sharding
};

struct McEstimate {
  long draws = 0;
  double mean_min = 0.0;
  double var_min = 0.0;
  double se_var_min = 0.0;
  double mean_avg = 0.0;
  double var_avg = 0.0;
  double se_var_avg = 0.0;
  std::vector<double> p_hat;  // empirical update frequency per member
  double p_ij_hat = 0.0;      // members 0 and 1 both updated
  double se_pair_excess = 0.0;  // jackknife SE of p_ij_hat - p_hat[0] p_hat[1]
  // Single-member statistics (member 0).
  double z_mean = 0.0;
  double se_z_mean = 0.0;
  double z_var = 0.0;
  double se_z_var = 0.0;
};

// Monte-Carlo estimate of Var(min_i Z_i) and Var(mean_i Z_i) with
// delete-a-group jackknife standard errors. Draws are generated in groups
// with per-group seeded streams, so results do not depend on `threads`.
McEstimate mc_min_avg_variance(const VarianceModel& m, const Coupling& coupling,
                               const McOptions& opts);

// Two couplings on common random numbers (shared X draws and indicator
// uniforms). Differences are first minus second, with jackknife SEs computed
// on the paired groups.
struct PairedComparison {
  McEstimate first;
  McEstimate second;
  double diff_var_avg = 0.0;  // first - second
  double se_diff_var_avg = 0.0;
  double diff_var_min = 0.0;
  double se_diff_var_min = 0.0;
};
PairedComparison compare_couplings(const VarianceModel& m, const Coupling& first,
                                   const Coupling& second, const McOptions& opts);

// Kolmogorov-Smirnov distance between the empirical CDF of min(Z_0, Z_1)
// under PairCoupled{m.p_ij} and the chosen closed form.
struct KsResult {
  double statistic;  // sup |F_n - F|
  double scaled;     // sqrt(n) * statistic
  double threshold;  // kKs3Sigma
  bool pass;
};
// Upper 0.27% point of the Kolmogorov distribution (two-sided 3 sigma).
inline constexpr double kKs3Sigma = 1.8177;
KsResult ks_min_cdf(const VarianceModel& m, MinCdfForm form, const McOptions& opts);

// Experiment driver used by the CLI.
struct LabCheck {
  std::string experiment;
  std::string name;
  std::string status;  // pass, fail, tie, info, counterexample
  double observed = 0.0;
  double expected = 0.0;
  double se = 0.0;
  std::string note;
};

struct KdppCase {
  VarianceModel model;  // p_i / p_ij are overwritten with exact k-DPP marginals
  std::optional<linalg::SymMatrix> kernel;
  int k = 2;
  std::string expect;  // "repulsive" or "near_independent"
};

struct LabConfig {
  McOptions mc;
  // Closed-form vs MC agreement for z_mean / z_variance on the full grid.
  double grid_a = -1.0;
  double grid_b = 1.0;
  std::vector<double> grid_c{0.2, 0.5, 0.9};
  std::vector<double> grid_d{-0.5, 0.2, 0.8};
  std::vector<double> grid_p{0.2, 0.5, 0.8};
  std::vector<VarianceModel> comparisons;
  std::vector<KdppCase> kdpp_cases;

  static LabConfig defaults();
};

struct LabReport {
  std::vector<LabCheck> checks;
  std::string json;  // full machine-readable report
  bool all_pass = false;
};

// Throws ConfigError for malformed documents or invalid models.
LabConfig parse_lab_config(std::string_view json_text);
LabReport run_lab(const LabConfig& cfg);

}  // namespace dcrit::variance_lab

#endif  // DCRIT_VARIANCE_LAB_HPP_
