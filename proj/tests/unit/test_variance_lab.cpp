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
#include <vector>

#include "dcrit/errors.hpp"
#include "dcrit/variance_lab.hpp"

namespace vl = dcrit::variance_lab;

namespace {

vl::VarianceModel model(double c, double d, double p, double pij) {
  vl::VarianceModel m;
  m.c = c;
  m.d = d;
  m.p_i = p;
  m.p_ij = pij;
  return m;
}

struct Raw {
  double m1, m2;
};

// E[min], E[min^2] of two independent uniforms by midpoint quadrature.
Raw min_of_uniforms(double l1, double h1, double l2, double h2) {
  const int n = 1500;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = l1 + (h1 - l1) * (i + 0.5) / n;
    for (int j = 0; j < n; ++j) {
      const double y = l2 + (h2 - l2) * (j + 0.5) / n;
      const double m = std::min(x, y);
      s1 += m;
      s2 += m * m;
    }
  }
  return {s1 / (double(n) * n), s2 / (double(n) * n)};
}

// Var(min(Z_0, Z_1)) by conditioning on the indicator pair.
double var_min_oracle(const vl::VarianceModel& m) {
  const double lo = m.updated_lo(), hi = m.updated_hi();
  const Raw none = min_of_uniforms(m.a, m.b, m.a, m.b);
  const Raw one = min_of_uniforms(m.a, m.b, lo, hi);
  const Raw both = min_of_uniforms(lo, hi, lo, hi);
  const double p11 = m.p_ij, p10 = m.p_i - m.p_ij, p00 = 1.0 - 2.0 * m.p_i + m.p_ij;
  const double e1 = p00 * none.m1 + 2.0 * p10 * one.m1 + p11 * both.m1;
  const double e2 = p00 * none.m2 + 2.0 * p10 * one.m2 + p11 * both.m2;
  return e2 - e1 * e1;
}

}  // namespace

TEST_CASE("z moments: examples") {
  CHECK(vl::z_mean(model(0.5, 0.2, 0.0, 0.0)) == doctest::Approx(0.0));
  CHECK(vl::z_mean(model(0.5, 0.2, 0.5, 0.25)) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(vl::z_mean(model(1.0 - 1e-12, 0.3, 1.0, 1.0)) == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(vl::z_variance(model(0.5, 0.2, 0.0, 0.0)) == doctest::Approx(4.0 / 12.0).epsilon(1e-14));
  CHECK(std::abs(vl::z_variance(model(1.0 - 1e-12, 0.3, 1.0, 1.0))) < 1e-9);
  vl::VarianceModel shifted = model(0.4, 3.5, 0.0, 0.0);
  shifted.a = 2.0;
  shifted.b = 6.0;
  CHECK(vl::z_variance(shifted) == doctest::Approx(16.0 / 12.0));
}

TEST_CASE("z moments: closed form against the mixture decomposition") {
  for (double c : {0.2, 0.5, 0.9}) {
    for (double d : {-0.5, 0.2, 0.8}) {
      for (double p : {0.2, 0.5, 0.8}) {
        const auto m = model(c, d, p, p * p);
        // Given Y=1, Z ~ U(updated_lo, updated_hi); given Y=0, Z ~ U(a, b).
        const double m0 = 0.0, v0 = 4.0 / 12.0;
        const double m1 = 0.5 * (m.updated_lo() + m.updated_hi());
        const double v1 = std::pow(m.updated_hi() - m.updated_lo(), 2) / 12.0;
        const double mean = (1 - p) * m0 + p * m1;
        const double var = (1 - p) * (v0 + m0 * m0) + p * (v1 + m1 * m1) - mean * mean;
        REQUIRE(vl::z_mean(m) == doctest::Approx(mean).epsilon(1e-13));
        REQUIRE(vl::z_variance(m) == doctest::Approx(var).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("model validation") {
  CHECK_NOTHROW(model(0.5, 0.2, 0.5, 0.0).validate());
  CHECK_THROWS_AS(model(0.5, 0.2, 0.5, 0.6).validate(), dcrit::ValidationError);
  CHECK_THROWS_AS(model(0.5, 0.2, 0.8, 0.5).validate(), dcrit::ValidationError);  // below 2p - 1
  CHECK_THROWS_AS(model(0.0, 0.2, 0.5, 0.25).validate(), dcrit::ValidationError);
  CHECK_THROWS_AS(model(0.5, 1.0, 0.5, 0.25).validate(), dcrit::ValidationError);
}

TEST_CASE("min CDF: support, monotonicity, product form under independence") {
  const auto m = model(0.5, 0.2, 0.5, 0.25);
  CHECK(vl::z_min_cdf(m, -1.0) == 0.0);
  CHECK(vl::z_min_cdf(m, -5.0) == 0.0);
  CHECK(vl::z_min_cdf(m, 1.0) == 1.0);
  CHECK(vl::z_min_cdf(m, 7.0) == 1.0);
  for (double c : {0.2, 0.5, 0.9}) {
    for (double d : {-0.5, 0.2, 0.8}) {
      for (double p : {0.0, 0.3, 0.7, 1.0}) {
        for (double pij : {std::max(0.0, 2 * p - 1), p * p, p}) {
          const auto mm = model(c, d, p, pij);
          double prev = 0.0;
          for (int i = 0; i <= 400; ++i) {
            const double z = -1.2 + 2.4 * i / 400.0;
            const double f = vl::z_min_cdf(mm, z);
            REQUIRE(f >= prev - 1e-15);
            REQUIRE(f >= 0.0);
            REQUIRE(f <= 1.0);
            REQUIRE(std::abs(vl::z_min_cdf(mm, z + 1e-12) - f) < 1e-9);
            prev = f;
          }
          if (std::abs(pij - p * p) < 1e-15) {
            for (double z : {-0.9, -0.3, 0.0, 0.4, 0.95}) {
              REQUIRE(vl::z_min_cdf_product_form(mm, z) == doctest::Approx(vl::z_min_cdf(mm, z)).epsilon(1e-12));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("min moments from the CDF match conditioning on the indicator pair") {
  for (const auto& m : {model(0.5, 0.2, 0.5, 0.15), model(0.9, 0.9, 0.5, 0.1), model(0.5, 0.8, 0.5, 0.1),
                        model(0.2, -0.5, 0.2, 0.02)}) {
    const auto mom = vl::min_moments_from_cdf(m);
    CHECK(mom.variance == doctest::Approx(var_min_oracle(m)).epsilon(1e-5));
  }
}

TEST_CASE("average variance closed form") {
  const auto cf = vl::avg_variance_closed_form(model(0.5, 0.2, 0.5, 0.15));
  CHECK(cf.psi == doctest::Approx(vl::z_variance(model(0.5, 0.2, 0.5, 0.15)) / 2.0));
  CHECK(cf.phi_half == doctest::Approx(0.005));
  CHECK(cf.phi_quarter == doctest::Approx(0.0025));
  CHECK(cf.var_avg_half == doctest::Approx(cf.psi - 0.0005));
  CHECK(cf.var_avg_quarter == doctest::Approx(cf.psi - 0.00025));
}

TEST_CASE("Monte Carlo engine") {
  const auto m = model(0.5, 0.2, 0.5, 0.15);
  vl::McOptions opts;
  opts.n_draws = 200000;
  opts.seed = 5;
  opts.groups = 50;

  SUBCASE("independent of the thread count") {
    const auto one = vl::mc_min_avg_variance(m, vl::PairCoupled{0.15}, opts);
    opts.threads = 4;
    const auto four = vl::mc_min_avg_variance(m, vl::PairCoupled{0.15}, opts);
    CHECK(std::abs(one.var_min - four.var_min) <= 1e-9);
    CHECK(std::abs(one.var_avg - four.var_avg) <= 1e-9);
    CHECK(one.se_var_avg == doctest::Approx(four.se_var_avg).epsilon(1e-9));
  }
  SUBCASE("estimates agree with closed forms") {
    const auto est = vl::mc_min_avg_variance(m, vl::PairCoupled{0.15}, opts);
    CHECK(est.draws == 200000);
    CHECK(std::abs(est.z_mean - vl::z_mean(m)) <= 4 * est.se_z_mean);
    CHECK(std::abs(est.z_var - vl::z_variance(m)) <= 4 * est.se_z_var);
    CHECK(std::abs(est.var_avg - vl::avg_variance_closed_form(m).var_avg_half) <= 4 * est.se_var_avg);
    CHECK(std::abs(est.var_min - vl::min_moments_from_cdf(m).variance) <= 4 * est.se_var_min);
    CHECK(std::abs(est.p_hat[0] - 0.5) < 0.005);
    CHECK(std::abs(est.p_ij_hat - 0.15) < 0.005);
  }
  SUBCASE("k-DPP indicators") {
    vl::VarianceModel km = model(0.5, 0.2, 0.5, 0.25);
    km.members = 3;
    const auto est = vl::mc_min_avg_variance(km, vl::KdppDriven{dcrit::linalg::SymMatrix::identity(4), 2}, opts);
    CHECK(est.p_hat.size() == 3);
    for (double p : est.p_hat) CHECK(std::abs(p - 0.5) < 0.006);
    CHECK(std::abs(est.p_ij_hat - 1.0 / 6.0) < 0.006);
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(vl::mc_min_avg_variance(m, vl::PairCoupled{0.6}, opts), dcrit::ValidationError);
    vl::VarianceModel three = m;
    three.members = 3;
    CHECK_THROWS_AS(vl::mc_min_avg_variance(three, vl::PairCoupled{0.15}, opts), dcrit::ValidationError);
    opts.n_draws = 10;
    CHECK_THROWS_AS(vl::mc_min_avg_variance(m, vl::Independent{}, opts), dcrit::ValidationError);
  }
}

TEST_CASE("paired comparison and KS") {
  vl::McOptions opts;
  opts.n_draws = 200000;
  opts.seed = 6;
  opts.groups = 50;
  const auto m = model(0.9, 0.9, 0.5, 0.1);
  const auto cmp = vl::compare_couplings(m, vl::PairCoupled{0.1}, vl::Independent{}, opts);
  CHECK(cmp.diff_var_avg == doctest::Approx(cmp.first.var_avg - cmp.second.var_avg).epsilon(1e-12));
  CHECK(cmp.diff_var_avg < -3 * cmp.se_diff_var_avg);
  CHECK(cmp.diff_var_min < -3 * cmp.se_diff_var_min);
  // Common random numbers: the paired SE is below the unpaired one.
  CHECK(cmp.se_diff_var_avg < std::hypot(cmp.first.se_var_avg, cmp.second.se_var_avg));

  const auto ks = vl::ks_min_cdf(model(0.5, 0.2, 0.5, 0.25), vl::MinCdfForm::kJoint, opts);
  CHECK(ks.pass);
  CHECK(ks.scaled == doctest::Approx(std::sqrt(200000.0) * ks.statistic));
}

TEST_CASE("lab config parsing") {
  const auto cfg = vl::parse_lab_config(R"({"n_draws": 100000, "seed": 3, "comparisons": [{"p_i": 0.5, "p_ij": 0.2}]})");
  CHECK(cfg.mc.n_draws == 100000);
  CHECK(cfg.comparisons.size() == 1);
  CHECK(cfg.comparisons[0].p_ij == 0.2);
  CHECK(cfg.grid_c.size() == 3);
  try {
    vl::parse_lab_config("{\n\"comparisons\": [\n{\"p_i\": 0.5,\n \"p_ij\": 0.7}]}");
    FAIL("expected a config error");
  } catch (const dcrit::ConfigError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(vl::parse_lab_config(R"({"n_draws": 10})"), dcrit::ConfigError);
  CHECK_THROWS_AS(vl::parse_lab_config(R"({"extra": 1})"), dcrit::ConfigError);
  CHECK_THROWS_AS(vl::parse_lab_config(R"({"kdpp": [{"identity_n": 4, "k": 2}]})"), dcrit::ConfigError);
  CHECK_THROWS_AS(vl::parse_lab_config("[1, 2"), dcrit::ConfigError);
}

TEST_CASE("lab driver statuses") {
  const auto cfg = vl::parse_lab_config(R"({
    "n_draws": 100000, "groups": 20,
    "grid": {"c": [0.5], "d": [0.2], "p_i": [0.5]},
    "comparisons": [{"p_i": 0.5, "p_ij": 0.25}, {"c": 0.9, "d": 0.9, "p_i": 0.5, "p_ij": 0.4}],
    "kdpp": []
  })");
  const auto report = vl::run_lab(cfg);
  auto status = [&](const std::string& exp, const std::string& name) {
    for (const auto& c : report.checks) {
      if (c.experiment == exp && c.name == name) return c.status;
    }
    return std::string("missing");
  };
  CHECK(status("comparison 0", "ordering_var_avg") == "tie");
  CHECK(status("comparison 1", "ordering_var_avg") == "info");
  CHECK(status("comparison 0", "phi_convention") == "info");
  CHECK(report.json.find("\"all_pass\"") != std::string::npos);
  CHECK(vl::run_lab(cfg).json == report.json);
}
