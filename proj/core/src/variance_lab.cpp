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

#include "dcrit/variance_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dcrit/dpp.hpp"
#include "dcrit/errors.hpp"
#include "dcrit/rl/config.hpp"
#include "dcrit/rng.hpp"

namespace dcrit::variance_lab {

namespace {

// Neumaier compensated summation.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

double uniform_cdf(double z, double lo, double hi) {
  if (z <= lo) return 0.0;
  if (z >= hi) return 1.0;
  return (z - lo) / (hi - lo);
}

// ((z - theta) 1{z > theta} - (z - alpha) 1{z > alpha}), theta >= alpha.
double ramp(double z, double theta, double alpha) {
  return (z > theta ? z - theta : 0.0) - (z > alpha ? z - alpha : 0.0);
}

double mixture_cdf_ramp(const VarianceModel& m, double weight, double z) {
  const double hi = m.d * m.c - m.b * (m.c - 1.0);
  const double lo = m.d * m.c - m.a * (m.c - 1.0);
  return (1.0 - weight) / (m.a - m.b) * ramp(z, m.b, m.a) +
         weight / ((1.0 - m.c) * (m.a - m.b)) * ramp(z, hi, lo);
}

// Per-group running sums for one coupling, values shifted by the X midpoint.
struct GroupSums {
  long n = 0;
  CompensatedSum s_min, ss_min, s_avg, ss_avg, s_z, ss_z;
  std::vector<long> updated;  // per member
  long both01 = 0;
};

struct Totals {
  double n = 0, s_min = 0, ss_min = 0, s_avg = 0, ss_avg = 0, s_z = 0, ss_z = 0, both01 = 0;
  std::vector<double> updated;

  void add(const GroupSums& g, double sign) {
    n += sign * static_cast<double>(g.n);
    s_min += sign * g.s_min.value();
    ss_min += sign * g.ss_min.value();
    s_avg += sign * g.s_avg.value();
    ss_avg += sign * g.ss_avg.value();
    s_z += sign * g.s_z.value();
    ss_z += sign * g.ss_z.value();
    both01 += sign * static_cast<double>(g.both01);
    if (updated.size() < g.updated.size()) updated.resize(g.updated.size(), 0.0);
    for (std::size_t i = 0; i < g.updated.size(); ++i) {
      updated[i] += sign * static_cast<double>(g.updated[i]);
    }
  }
};

double sample_var(double n, double s, double ss) { return (ss - s * s / n) / (n - 1.0); }

double pair_excess(const Totals& t) {
  if (t.updated.size() < 2) return 0.0;
  return t.both01 / t.n - (t.updated[0] / t.n) * (t.updated[1] / t.n);
}

struct Stat {
  double value;
  double se;
};

// Delete-a-group jackknife of f over the group table.
template <typename F>
Stat jackknife(const std::vector<std::vector<GroupSums>>& groups, F f) {
  const std::size_t n_couplings = groups.size();
  const std::size_t n_groups = groups.front().size();
  std::vector<Totals> all(n_couplings);
  for (std::size_t c = 0; c < n_couplings; ++c) {
    for (const auto& g : groups[c]) all[c].add(g, 1.0);
  }
  const double full = f(all);
  std::vector<double> loo(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::vector<Totals> minus = all;
    for (std::size_t c = 0; c < n_couplings; ++c) minus[c].add(groups[c][g], -1.0);
    loo[g] = f(minus);
  }
  double mean = 0.0;
  for (double v : loo) mean += v;
  mean /= static_cast<double>(n_groups);
  double acc = 0.0;
  for (double v : loo) acc += (v - mean) * (v - mean);
  const double gg = static_cast<double>(n_groups);
  return {full, std::sqrt((gg - 1.0) / gg * acc)};
}

int members_of(const VarianceModel& m, const Coupling& c) {
  if (std::holds_alternative<PairCoupled>(c) && m.members != 2) {
    throw ValidationError("PairCoupled coupling requires exactly 2 members");
  }
  if (const auto* k = std::get_if<KdppDriven>(&c)) {
    if (m.members > k->kernel.size()) {
      throw ValidationError("KdppDriven: kernel has fewer items than ensemble members");
    }
  }
  return m.members;
}

void validate_options(const McOptions& o) {
  if (o.groups < 2) throw ValidationError("McOptions: need at least 2 jackknife groups");
  if (o.n_draws < 2L * o.groups) throw ValidationError("McOptions: too few draws for the group count");
  if (o.threads < 1) throw ValidationError("McOptions: threads must be >= 1");
}

// Runs `body(group_index)` for every group on `threads` workers.
template <typename Body>
void for_each_group(int groups, int threads, Body body) {
  const int workers = std::max(1, std::min(threads, groups));
  if (workers == 1) {
    for (int g = 0; g < groups; ++g) body(g);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int g = next++; g < groups; g = next++) body(g);
    });
  }
  for (auto& t : pool) t.join();
}

long group_size(const McOptions& o, int g) {
  const long base = o.n_draws / o.groups;
  return base + (g < o.n_draws % o.groups ? 1 : 0);
}

// Draws indicators for one member set. `u` holds one uniform per member.
void draw_indicators(const VarianceModel& m, const Coupling& coupling,
                     const std::vector<double>& u, const dpp::KDppSampler* sampler,
                     SeededRng& kdpp_rng, std::vector<int>& y) {
  const int members = m.members;
  if (std::holds_alternative<Independent>(coupling)) {
    for (int i = 0; i < members; ++i) y[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] < m.p_i;
  } else if (const auto* pc = std::get_if<PairCoupled>(&coupling)) {
    const double p = m.p_i;
    y[0] = u[0] < p;
    double cond;
    if (y[0]) {
      cond = p > 0.0 ? pc->p_ij / p : 0.0;
    } else {
      cond = p < 1.0 ? (p - pc->p_ij) / (1.0 - p) : 0.0;
    }
    y[1] = u[1] < cond;
  } else {
    const dpp::IndexSet chosen = sampler->sample(kdpp_rng);
    for (int i = 0; i < members; ++i) y[static_cast<std::size_t>(i)] = chosen.contains(i);
  }
}

std::vector<std::vector<GroupSums>> simulate(const VarianceModel& m,
                                             const std::vector<const Coupling*>& couplings,
                                             const McOptions& opts) {
  m.validate();
  validate_options(opts);
  const int members = m.members;
  std::vector<std::optional<dpp::KDppSampler>> samplers(couplings.size());
  for (std::size_t c = 0; c < couplings.size(); ++c) {
    members_of(m, *couplings[c]);
    if (const auto* pc = std::get_if<PairCoupled>(couplings[c])) {
      VarianceModel check = m;
      check.p_ij = pc->p_ij;
      check.validate();
    }
    if (const auto* k = std::get_if<KdppDriven>(couplings[c])) samplers[c].emplace(k->kernel, k->k);
  }

  const SeededRng root(opts.seed);
  const double shift = m.x_mean();
  std::vector<std::vector<GroupSums>> out(couplings.size(),
                                          std::vector<GroupSums>(static_cast<std::size_t>(opts.groups)));
  for_each_group(opts.groups, opts.threads, [&](int g) {
    const auto ug = static_cast<std::uint64_t>(g);
    SeededRng x_rng = root.derive(3 * ug);
    SeededRng u_rng = root.derive(3 * ug + 1);
    SeededRng k_rng = root.derive(3 * ug + 2);
    std::vector<double> x(static_cast<std::size_t>(members));
    std::vector<double> u(static_cast<std::size_t>(members));
    std::vector<int> y(static_cast<std::size_t>(members));
    for (auto& per_coupling : out) {
      per_coupling[static_cast<std::size_t>(g)].updated.assign(static_cast<std::size_t>(members), 0);
    }
    const long n = group_size(opts, g);
    for (long draw = 0; draw < n; ++draw) {
      for (auto& v : x) v = x_rng.uniform(m.a, m.b);
      for (auto& v : u) v = u_rng.uniform();
      for (std::size_t c = 0; c < couplings.size(); ++c) {
        draw_indicators(m, *couplings[c], u, samplers[c] ? &*samplers[c] : nullptr, k_rng, y);
        GroupSums& acc = out[c][static_cast<std::size_t>(g)];
        double z_min = std::numeric_limits<double>::infinity();
        double z_sum = 0.0;
        for (int i = 0; i < members; ++i) {
          const auto ui = static_cast<std::size_t>(i);
          const double z = x[ui] + m.c * y[ui] * (m.d - x[ui]);
          z_min = std::min(z_min, z);
          z_sum += z;
          acc.updated[ui] += y[ui];
          if (i == 0) {
            acc.s_z.add(z - shift);
            acc.ss_z.add((z - shift) * (z - shift));
          }
        }
        const double z_avg = z_sum / members;
        acc.s_min.add(z_min - shift);
        acc.ss_min.add((z_min - shift) * (z_min - shift));
        acc.s_avg.add(z_avg - shift);
        acc.ss_avg.add((z_avg - shift) * (z_avg - shift));
        if (members >= 2 && y[0] && y[1]) ++acc.both01;
        ++acc.n;
      }
    }
  });
  return out;
}

McEstimate summarize(const std::vector<std::vector<GroupSums>>& groups, std::size_t c,
                     double shift) {
  const std::vector<std::vector<GroupSums>> one{groups[c]};
  McEstimate e;
  Totals t;
  for (const auto& g : groups[c]) t.add(g, 1.0);
  e.draws = static_cast<long>(t.n);
  e.mean_min = shift + t.s_min / t.n;
  e.mean_avg = shift + t.s_avg / t.n;
  const Stat vmin = jackknife(one, [](const std::vector<Totals>& x) {
    return sample_var(x[0].n, x[0].s_min, x[0].ss_min);
  });
  const Stat vavg = jackknife(one, [](const std::vector<Totals>& x) {
    return sample_var(x[0].n, x[0].s_avg, x[0].ss_avg);
  });
  const Stat zm = jackknife(one, [](const std::vector<Totals>& x) { return x[0].s_z / x[0].n; });
  const Stat zv = jackknife(one, [](const std::vector<Totals>& x) {
    return sample_var(x[0].n, x[0].s_z, x[0].ss_z);
  });
  const Stat excess = jackknife(one, [](const std::vector<Totals>& x) { return pair_excess(x[0]); });
  e.var_min = vmin.value;
  e.se_var_min = vmin.se;
  e.var_avg = vavg.value;
  e.se_var_avg = vavg.se;
  e.z_mean = shift + zm.value;
  e.se_z_mean = zm.se;
  e.z_var = zv.value;
  e.se_z_var = zv.se;
  for (double u : t.updated) e.p_hat.push_back(u / t.n);
  e.p_ij_hat = t.both01 / t.n;
  e.se_pair_excess = excess.se;
  return e;
}

}  // namespace

void VarianceModel::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("VarianceModel: " + what); };
  if (!(std::isfinite(a) && std::isfinite(b) && a < b)) fail("need finite a < b");
  if (!(d > a && d < b)) fail("need a < d < b");
  if (!(c > 0.0 && c < 1.0)) fail("need 0 < c < 1");
  if (!(p_i >= 0.0 && p_i <= 1.0)) fail("need 0 <= p_i <= 1");
  const double lower = std::max(0.0, 2.0 * p_i - 1.0);
  constexpr double kSlack = 1e-12;
  if (!(p_ij >= lower - kSlack && p_ij <= p_i + kSlack)) {
    std::ostringstream msg;
    msg << "p_ij = " << p_ij << " outside Frechet bounds [" << lower << ", " << p_i << "]";
    fail(msg.str());
  }
  if (members < 1) fail("need at least one member");
}

double z_mean(const VarianceModel& m) {
  return (1.0 - m.c * m.p_i) * (m.a + m.b) / 2.0 + m.c * m.d * m.p_i;
}

double z_variance(const VarianceModel& m) {
  const double s = (m.a * m.a + m.a * m.b + m.b * m.b) / 3.0;
  const double second = (1.0 - 2.0 * m.c * m.p_i + m.p_i * m.c * m.c) * s +
                        m.c * m.d * m.p_i * ((m.a + m.b) * (1.0 - m.c) + m.c * m.d);
  const double mean = z_mean(m);
  return second - mean * mean;
}

double z_cdf(const VarianceModel& m, double z) {
  return (1.0 - m.p_i) * uniform_cdf(z, m.a, m.b) +
         m.p_i * uniform_cdf(z, m.updated_lo(), m.updated_hi());
}

double z_min_cdf(const VarianceModel& m, double z) {
  const double s0 = 1.0 - uniform_cdf(z, m.a, m.b);
  const double s1 = 1.0 - uniform_cdf(z, m.updated_lo(), m.updated_hi());
  const double p11 = m.p_ij;
  const double p10 = m.p_i - m.p_ij;
  const double p00 = 1.0 - 2.0 * m.p_i + m.p_ij;
  const double survive = p00 * s0 * s0 + 2.0 * p10 * s0 * s1 + p11 * s1 * s1;
  return std::clamp(1.0 - survive, 0.0, 1.0);
}

double z_min_cdf_product_form(const VarianceModel& m, double z) {
  const double cond = m.p_i > 0.0 ? m.p_ij / m.p_i : m.p_i;
  const double f = mixture_cdf_ramp(m, m.p_i, z);
  const double f_cond = mixture_cdf_ramp(m, cond, z);
  return 2.0 * f - f_cond * f;
}

Moments min_moments_from_cdf(const VarianceModel& m, MinCdfForm form, int intervals) {
  m.validate();
  if (intervals < 2) throw ValidationError("min_moments_from_cdf: need >= 2 intervals");
  const double lo = std::min(m.a, m.updated_lo());
  const double hi = std::max(m.b, m.updated_hi());
  const double h = (hi - lo) / intervals;
  auto cdf = [&](double z) {
    return form == MinCdfForm::kJoint ? z_min_cdf(m, z) : z_min_cdf_product_form(m, z);
  };
  CompensatedSum first, second;
  for (int i = 0; i <= intervals; ++i) {
    const double z = lo + h * i;
    const double w = (i == 0 || i == intervals) ? 0.5 : 1.0;
    const double tail = 1.0 - cdf(z);
    first.add(w * tail);
    second.add(w * (z - lo) * tail);
  }
  const double e1 = h * first.value();         // E[Z - lo]
  const double e2 = 2.0 * h * second.value();  // E[(Z - lo)^2]
  return {lo + e1, e2 - e1 * e1};
}

AvgVarianceClosedForm avg_variance_closed_form(const VarianceModel& m) {
  AvgVarianceClosedForm out{};
  const double shift = m.c * (m.d - m.x_mean());
  const double excess = m.p_ij - m.p_i * m.p_i;
  out.psi = z_variance(m) / 2.0;
  out.phi_half = shift * shift / 2.0;
  out.phi_quarter = shift * shift / 4.0;
  out.var_avg_half = out.psi + out.phi_half * excess;
  out.var_avg_quarter = out.psi + out.phi_quarter * excess;
  return out;
}

McEstimate mc_min_avg_variance(const VarianceModel& m, const Coupling& coupling,
                               const McOptions& opts) {
  const auto groups = simulate(m, {&coupling}, opts);
  return summarize(groups, 0, m.x_mean());
}

PairedComparison compare_couplings(const VarianceModel& m, const Coupling& first,
                                   const Coupling& second, const McOptions& opts) {
  const auto groups = simulate(m, {&first, &second}, opts);
  PairedComparison out;
  out.first = summarize(groups, 0, m.x_mean());
  out.second = summarize(groups, 1, m.x_mean());
  const Stat davg = jackknife(groups, [](const std::vector<Totals>& x) {
    return sample_var(x[0].n, x[0].s_avg, x[0].ss_avg) - sample_var(x[1].n, x[1].s_avg, x[1].ss_avg);
  });
  const Stat dmin = jackknife(groups, [](const std::vector<Totals>& x) {
    return sample_var(x[0].n, x[0].s_min, x[0].ss_min) - sample_var(x[1].n, x[1].s_min, x[1].ss_min);
  });
  out.diff_var_avg = davg.value;
  out.se_diff_var_avg = davg.se;
  out.diff_var_min = dmin.value;
  out.se_diff_var_min = dmin.se;
  return out;
}

KsResult ks_min_cdf(const VarianceModel& m, MinCdfForm form, const McOptions& opts) {
  m.validate();
  validate_options(opts);
  if (m.members != 2) throw ValidationError("ks_min_cdf: requires a two-member model");
  const Coupling coupling = PairCoupled{m.p_ij};
  const SeededRng root(opts.seed);
  std::vector<std::vector<double>> per_group(static_cast<std::size_t>(opts.groups));
  for_each_group(opts.groups, opts.threads, [&](int g) {
    const auto ug = static_cast<std::uint64_t>(g);
    SeededRng x_rng = root.derive(3 * ug);
    SeededRng u_rng = root.derive(3 * ug + 1);
    SeededRng unused = root.derive(3 * ug + 2);
    std::vector<double> u(2);
    std::vector<int> y(2);
    auto& mins = per_group[static_cast<std::size_t>(g)];
    const long n = group_size(opts, g);
    mins.reserve(static_cast<std::size_t>(n));
    for (long draw = 0; draw < n; ++draw) {
      const double x0 = x_rng.uniform(m.a, m.b);
      const double x1 = x_rng.uniform(m.a, m.b);
      u[0] = u_rng.uniform();
      u[1] = u_rng.uniform();
      draw_indicators(m, coupling, u, nullptr, unused, y);
      mins.push_back(std::min(x0 + m.c * y[0] * (m.d - x0), x1 + m.c * y[1] * (m.d - x1)));
    }
  });
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(opts.n_draws));
  for (const auto& g : per_group) all.insert(all.end(), g.begin(), g.end());
  std::sort(all.begin(), all.end());
  const double n = static_cast<double>(all.size());
  double d = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const double f = form == MinCdfForm::kJoint ? z_min_cdf(m, all[i])
                                                : z_min_cdf_product_form(m, all[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f),
                  std::abs(f - static_cast<double>(i) / n)});
  }
  KsResult out{};
  out.statistic = d;
  out.scaled = std::sqrt(n) * d;
  out.threshold = kKs3Sigma;
  out.pass = out.scaled <= kKs3Sigma;
  return out;
}

namespace {

using ojson = nlohmann::ordered_json;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

ojson model_json(const VarianceModel& m) {
  return {{"a", m.a}, {"b", m.b}, {"c", m.c}, {"d", m.d},
          {"p_i", m.p_i}, {"p_ij", m.p_ij}, {"members", m.members}};
}

ojson estimate_json(const McEstimate& e) {
  return {{"draws", e.draws},
          {"mean_min", e.mean_min},
          {"var_min", e.var_min},
          {"se_var_min", e.se_var_min},
          {"mean_avg", e.mean_avg},
          {"var_avg", e.var_avg},
          {"se_var_avg", e.se_var_avg},
          {"p_hat", e.p_hat},
          {"p_ij_hat", e.p_ij_hat},
          {"se_pair_excess", e.se_pair_excess},
          {"z_mean", e.z_mean},
          {"se_z_mean", e.se_z_mean},
          {"z_var", e.z_var},
          {"se_z_var", e.se_z_var}};
}

ojson check_json(const LabCheck& c) {
  return {{"name", c.name},       {"status", c.status}, {"observed", c.observed},
          {"expected", c.expected}, {"se", c.se},       {"note", c.note}};
}

bool within(double observed, double expected, double se) {
  return std::abs(observed - expected) <= 3.0 * se;
}

LabCheck agreement(const std::string& exp, const std::string& name, double observed,
                   double expected, double se) {
  return {exp, name, within(observed, expected, se) ? "pass" : "fail", observed, expected, se,
          "|observed - expected| <= 3 se"};
}

double combined_se(double s1, double s2) { return std::sqrt(s1 * s1 + s2 * s2); }

// Ordering of a coupled variance against the independent baseline, on the
// paired difference `diff` with SE `se`.
LabCheck ordering(const std::string& exp, const std::string& name, double diff, double se,
                  double excess, double expected_diff) {
  LabCheck c{exp, name, "", diff, expected_diff, se, ""};
  constexpr double kTieExcess = 1e-12;
  const bool below = diff < -3.0 * se;
  const bool above = diff > 3.0 * se;
  if (std::abs(excess) <= kTieExcess) {
    c.status = (below || above) ? "fail" : "tie";
    c.note = "p_ij = p_i^2: tie within error expected";
  } else if (excess > 0.0) {
    c.status = "info";
    c.note = std::string("positive coupling: ") +
             (above ? "above independent" : below ? "below independent" : "within error of independent");
  } else if (below) {
    c.status = "pass";
    c.note = "below independent beyond 3 se";
  } else if (above) {
    c.status = "counterexample";
    c.note = "negative coupling raised the variance beyond 3 se";
  } else {
    c.status = "fail";
    c.note = "difference not resolved beyond 3 se";
  }
  return c;
}

McOptions experiment_options(const McOptions& base, std::uint64_t index) {
  McOptions o = base;
  o.seed = splitmix64(base.seed + 0x9E3779B97F4A7C15ULL * (index + 1));
  return o;
}

struct Experiment {
  std::string name;
  ojson doc;
  std::vector<LabCheck> checks;
};

Experiment grid_point(const VarianceModel& m, const McOptions& opts, const std::string& name) {
  Experiment e{name, ojson::object(), {}};
  const McEstimate est = mc_min_avg_variance(m, Independent{}, opts);
  e.checks.push_back(agreement(name, "z_mean", est.z_mean, z_mean(m), est.se_z_mean));
  e.checks.push_back(agreement(name, "z_variance", est.z_var, z_variance(m), est.se_z_var));
  e.doc["closed_form"] = {{"z_mean", z_mean(m)}, {"z_variance", z_variance(m)}};
  e.doc["mc"] = estimate_json(est);
  e.doc["model"] = model_json(m);
  return e;
}

Experiment pair_comparison(const VarianceModel& m, const McOptions& opts, const std::string& name) {
  Experiment e{name, ojson::object(), {}};
  VarianceModel indep = m;
  indep.p_ij = m.p_i * m.p_i;
  const PairedComparison cmp = compare_couplings(m, PairCoupled{m.p_ij}, Independent{}, opts);
  const AvgVarianceClosedForm cf = avg_variance_closed_form(m);
  const AvgVarianceClosedForm cf_indep = avg_variance_closed_form(indep);
  const double excess = m.p_ij - m.p_i * m.p_i;
  const Moments min_joint = min_moments_from_cdf(m, MinCdfForm::kJoint);
  const Moments min_indep = min_moments_from_cdf(indep, MinCdfForm::kJoint);
  const Moments min_product = min_moments_from_cdf(m, MinCdfForm::kProductForm);

  e.checks.push_back(agreement(name, "var_avg_closed_form", cmp.first.var_avg, cf.var_avg_half,
                               cmp.first.se_var_avg));
  e.checks.push_back(agreement(name, "var_avg_independent_psi", cmp.second.var_avg,
                               cf_indep.psi, cmp.second.se_var_avg));
  {
    const double se = cmp.se_diff_var_avg;
    const double diff = cmp.diff_var_avg;
    LabCheck c{name, "phi_convention", "info", diff, cf.phi_half * excess, se, ""};
    c.note = "phi=(c(d-mu))^2/2 predicts " + fmt(cf.phi_half * excess) +
             (within(diff, cf.phi_half * excess, se) ? " (within 3 se)" : " (outside 3 se)") +
             "; phi=(c(d-mu))^2/4 predicts " + fmt(cf.phi_quarter * excess) +
             (within(diff, cf.phi_quarter * excess, se) ? " (within 3 se)" : " (outside 3 se)");
    e.checks.push_back(c);
  }
  e.checks.push_back(agreement(name, "var_min_from_cdf", cmp.first.var_min, min_joint.variance,
                               cmp.first.se_var_min));
  {
    LabCheck c{name, "var_min_product_form_cdf", "info", cmp.first.var_min, min_product.variance,
               cmp.first.se_var_min, ""};
    c.note = within(c.observed, c.expected, c.se) ? "product form within 3 se"
                                                  : "product form outside 3 se";
    e.checks.push_back(c);
  }
  const KsResult ks = ks_min_cdf(m, MinCdfForm::kJoint, opts);
  e.checks.push_back({name, "ks_min_cdf", ks.pass ? "pass" : "fail", ks.scaled, 0.0, ks.threshold,
                      "sqrt(n) D <= " + fmt(ks.threshold)});
  const KsResult ks_product = ks_min_cdf(m, MinCdfForm::kProductForm, opts);
  e.checks.push_back({name, "ks_min_cdf_product_form", "info", ks_product.scaled, 0.0,
                      ks_product.threshold,
                      ks_product.pass ? "product form inside KS band" : "product form outside KS band"});
  e.checks.push_back(ordering(name, "ordering_var_avg", cmp.diff_var_avg, cmp.se_diff_var_avg, excess,
                              cf.var_avg_half - cf_indep.var_avg_half));
  e.checks.push_back(ordering(name, "ordering_var_min", cmp.diff_var_min, cmp.se_diff_var_min, excess,
                              min_joint.variance - min_indep.variance));

  e.doc["model"] = model_json(m);
  e.doc["closed_form"] = {{"psi", cf.psi},
                          {"phi_half", cf.phi_half},
                          {"phi_quarter", cf.phi_quarter},
                          {"var_avg_half", cf.var_avg_half},
                          {"var_avg_quarter", cf.var_avg_quarter},
                          {"var_avg_independent", cf_indep.var_avg_half},
                          {"var_min_joint_cdf", min_joint.variance},
                          {"var_min_product_cdf", min_product.variance},
                          {"var_min_independent", min_indep.variance}};
  e.doc["mc_coupled"] = estimate_json(cmp.first);
  e.doc["mc_independent"] = estimate_json(cmp.second);
  e.doc["paired"] = {{"diff_var_avg", cmp.diff_var_avg},
                     {"se_diff_var_avg", cmp.se_diff_var_avg},
                     {"diff_var_min", cmp.diff_var_min},
                     {"se_diff_var_min", cmp.se_diff_var_min}};
  return e;
}

struct ExactPair {
  double p0, p1, p01;
};

ExactPair exact_pair(const linalg::SymMatrix& l, int k) {
  ExactPair out{0.0, 0.0, 0.0};
  for (const auto& [set, prob] : dpp::kdpp_prob_bruteforce(l, k)) {
    const bool in0 = set.contains(0);
    const bool in1 = set.contains(1);
    if (in0) out.p0 += prob;
    if (in1) out.p1 += prob;
    if (in0 && in1) out.p01 += prob;
  }
  return out;
}

Experiment kdpp_case(const KdppCase& kc, const McOptions& opts, const std::string& name) {
  Experiment e{name, ojson::object(), {}};
  const linalg::SymMatrix& l = *kc.kernel;
  const ExactPair ex = exact_pair(l, kc.k);
  VarianceModel m = kc.model;
  m.members = 2;
  m.p_i = 0.5 * (ex.p0 + ex.p1);
  m.p_ij = ex.p01;
  m.validate();
  const PairedComparison cmp = compare_couplings(m, KdppDriven{l, kc.k}, Independent{}, opts);
  const double n = static_cast<double>(cmp.first.draws);
  const double p = m.p_i;

  e.checks.push_back(agreement(name, "kdpp_marginal_p0", cmp.first.p_hat[0], ex.p0,
                               std::sqrt(ex.p0 * (1.0 - ex.p0) / n)));
  const double excess_hat = cmp.first.p_ij_hat - cmp.first.p_hat[0] * cmp.first.p_hat[1];
  if (kc.expect == "repulsive") {
    LabCheck c{name, "kdpp_repulsive_pair", "", excess_hat, ex.p01 - ex.p0 * ex.p1,
               cmp.first.se_pair_excess, "empirical p_ij - p_i p_j < 0 beyond 3 se"};
    c.status = excess_hat < -3.0 * c.se ? "pass" : "fail";
    e.checks.push_back(c);
    const double excess = m.p_ij - p * p;
    const AvgVarianceClosedForm cf = avg_variance_closed_form(m);
    VarianceModel indep = m;
    indep.p_ij = p * p;
    e.checks.push_back(ordering(name, "ordering_var_avg", cmp.diff_var_avg, cmp.se_diff_var_avg, excess,
                                cf.phi_half * excess));
    e.checks.push_back(ordering(name, "ordering_var_min", cmp.diff_var_min, cmp.se_diff_var_min, excess,
                                min_moments_from_cdf(m).variance - min_moments_from_cdf(indep).variance));
  } else {
    const double se_avg = combined_se(cmp.first.se_var_avg, cmp.second.se_var_avg);
    const double se_min = combined_se(cmp.first.se_var_min, cmp.second.se_var_min);
    LabCheck avg = agreement(name, "kdpp_matches_independent_var_avg", cmp.first.var_avg,
                             cmp.second.var_avg, se_avg);
    avg.note = "within 3 combined (unpaired) se";
    LabCheck mn = agreement(name, "kdpp_matches_independent_var_min", cmp.first.var_min,
                            cmp.second.var_min, se_min);
    mn.note = avg.note;
    e.checks.push_back(avg);
    e.checks.push_back(mn);
  }

  e.doc["model"] = model_json(m);
  e.doc["kernel_size"] = l.size();
  e.doc["k"] = kc.k;
  e.doc["expect"] = kc.expect;
  e.doc["exact"] = {{"p0", ex.p0}, {"p1", ex.p1}, {"p01", ex.p01}};
  e.doc["mc_kdpp"] = estimate_json(cmp.first);
  e.doc["mc_independent"] = estimate_json(cmp.second);
  e.doc["paired"] = {{"diff_var_avg", cmp.diff_var_avg},
                     {"se_diff_var_avg", cmp.se_diff_var_avg},
                     {"diff_var_min", cmp.diff_var_min},
                     {"se_diff_var_min", cmp.se_diff_var_min}};
  return e;
}

linalg::SymMatrix near_identity(int n, double off) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Constant(n, n, off);
  l.diagonal().setOnes();
  return linalg::SymMatrix(l);
}

VarianceModel base_model(double c, double d) {
  VarianceModel m;
  m.c = c;
  m.d = d;
  return m;
}

// JSON helpers for the lab config.
class LabReader {
 public:
  explicit LabReader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError("'" + key + "': " + message, rl::locate_key_line(text_, key));
  }

  void only(const ojson& j, std::initializer_list<std::string_view> keys, const std::string& where) const {
    if (!j.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : j.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) fail(key, "unknown key");
    }
  }

  double number(const ojson& j, const std::string& key, double fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) fail(key, "expected a number");
    return j.at(key).get<double>();
  }

  long integer(const ojson& j, const std::string& key, long fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) fail(key, "expected an integer");
    return j.at(key).get<long>();
  }

  std::vector<double> numbers(const ojson& j, const std::string& key,
                              const std::vector<double>& fallback) const {
    if (!j.contains(key)) return fallback;
    const ojson& v = j.at(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(key, "expected a non-empty array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  VarianceModel model(const ojson& j, const std::string& where, bool with_p) const {
    VarianceModel m;
    m.a = number(j, "a", m.a);
    m.b = number(j, "b", m.b);
    m.c = number(j, "c", m.c);
    m.d = number(j, "d", m.d);
    if (with_p) {
      m.p_i = number(j, "p_i", m.p_i);
      m.p_ij = number(j, "p_ij", m.p_i * m.p_i);
    }
    try {
      m.validate();
    } catch (const ValidationError& e) {
      fail(j.contains("p_ij") ? "p_ij" : where, e.what());
    }
    return m;
  }

  linalg::SymMatrix kernel(const ojson& j) const {
    if (j.contains("kernel")) {
      const ojson& rows = j.at("kernel");
      if (!rows.is_array() || rows.empty()) fail("kernel", "expected a square array of rows");
      const auto n = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd l(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const ojson& row = rows.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
          fail("kernel", "expected a square array of rows");
        }
        for (Eigen::Index c = 0; c < n; ++c) {
          const ojson& v = row.at(static_cast<std::size_t>(c));
          if (!v.is_number()) fail("kernel", "entries must be numbers");
          l(r, c) = v.get<double>();
        }
      }
      try {
        return linalg::SymMatrix(l);
      } catch (const ValidationError& e) {
        fail("kernel", e.what());
      }
    }
    if (j.contains("identity_n")) {
      const long n = integer(j, "identity_n", 0);
      if (n < 2 || n > 20) fail("identity_n", "expected 2 <= identity_n <= 20");
      const double off = number(j, "off_diagonal", 0.0);
      return near_identity(static_cast<int>(n), off);
    }
    fail("kdpp", "each case needs 'kernel' or 'identity_n'");
  }

 private:
  std::string_view text_;
};

}  // namespace

LabConfig LabConfig::defaults() {
  LabConfig cfg;
  auto pair = [](double c, double d, double p, double pij) {
    VarianceModel m = base_model(c, d);
    m.p_i = p;
    m.p_ij = pij;
    return m;
  };
  cfg.comparisons = {pair(0.5, 0.2, 0.5, 0.15), pair(0.9, 0.9, 0.5, 0.10), pair(0.2, -0.5, 0.2, 0.02),
                     pair(0.5, 0.2, 0.5, 0.25), pair(0.5, 0.2, 0.5, 0.35)};
  Eigen::MatrixXd repulsive = Eigen::MatrixXd::Identity(4, 4);
  repulsive(0, 1) = repulsive(1, 0) = 0.9;
  cfg.kdpp_cases = {
      {base_model(0.9, 0.9), linalg::SymMatrix(repulsive), 2, "repulsive"},
      {base_model(0.5, 0.2), near_identity(10, 0.01), 5, "near_independent"},
  };
  return cfg;
}

LabConfig parse_lab_config(std::string_view json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const ojson::parse_error& e) {
    throw ConfigError(e.what(), 0);
  }
  const LabReader r(json_text);
  r.only(doc, {"n_draws", "seed", "groups", "threads", "grid", "comparisons", "kdpp"}, "document");
  LabConfig cfg = LabConfig::defaults();
  cfg.mc.n_draws = r.integer(doc, "n_draws", cfg.mc.n_draws);
  if (cfg.mc.n_draws < 100000) r.fail("n_draws", "expected at least 100000 draws");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) r.fail("seed", "expected a non-negative integer");
    cfg.mc.seed = doc.at("seed").get<std::uint64_t>();
  }
  cfg.mc.groups = static_cast<int>(r.integer(doc, "groups", cfg.mc.groups));
  if (cfg.mc.groups < 2 || cfg.mc.groups > 10000) r.fail("groups", "expected 2 <= groups <= 10000");
  cfg.mc.threads = static_cast<int>(r.integer(doc, "threads", cfg.mc.threads));
  if (cfg.mc.threads < 1) r.fail("threads", "expected a positive integer");

  if (doc.contains("grid")) {
    const ojson& g = doc.at("grid");
    r.only(g, {"a", "b", "c", "d", "p_i"}, "grid");
    cfg.grid_a = r.number(g, "a", cfg.grid_a);
    cfg.grid_b = r.number(g, "b", cfg.grid_b);
    cfg.grid_c = r.numbers(g, "c", cfg.grid_c);
    cfg.grid_d = r.numbers(g, "d", cfg.grid_d);
    cfg.grid_p = r.numbers(g, "p_i", cfg.grid_p);
    for (double c : cfg.grid_c) {
      for (double d : cfg.grid_d) {
        for (double p : cfg.grid_p) {
          VarianceModel m;
          m.a = cfg.grid_a;
          m.b = cfg.grid_b;
          m.c = c;
          m.d = d;
          m.p_i = p;
          m.p_ij = p * p;
          try {
            m.validate();
          } catch (const ValidationError& e) {
            r.fail("grid", e.what());
          }
        }
      }
    }
  }
  if (doc.contains("comparisons")) {
    const ojson& list = doc.at("comparisons");
    if (!list.is_array()) r.fail("comparisons", "expected an array");
    cfg.comparisons.clear();
    for (const auto& item : list) {
      r.only(item, {"a", "b", "c", "d", "p_i", "p_ij"}, "comparisons");
      cfg.comparisons.push_back(r.model(item, "comparisons", true));
    }
  }
  if (doc.contains("kdpp")) {
    const ojson& list = doc.at("kdpp");
    if (!list.is_array()) r.fail("kdpp", "expected an array");
    cfg.kdpp_cases.clear();
    for (const auto& item : list) {
      r.only(item, {"a", "b", "c", "d", "kernel", "identity_n", "off_diagonal", "k", "expect"}, "kdpp");
      KdppCase kc;
      kc.model = r.model(item, "kdpp", false);
      kc.kernel = r.kernel(item);
      kc.k = static_cast<int>(r.integer(item, "k", 2));
      if (kc.k < 2 || kc.k > kc.kernel->size()) r.fail("k", "expected 2 <= k <= kernel size");
      if (!item.contains("expect") || !item.at("expect").is_string()) {
        r.fail("expect", "expected \"repulsive\" or \"near_independent\"");
      }
      kc.expect = item.at("expect").get<std::string>();
      if (kc.expect != "repulsive" && kc.expect != "near_independent") {
        r.fail("expect", "expected \"repulsive\" or \"near_independent\"");
      }
      cfg.kdpp_cases.push_back(std::move(kc));
    }
  }
  return cfg;
}

LabReport run_lab(const LabConfig& cfg) {
  std::vector<Experiment> experiments;
  std::uint64_t index = 0;
  for (double c : cfg.grid_c) {
    for (double d : cfg.grid_d) {
      for (double p : cfg.grid_p) {
        VarianceModel m;
        m.a = cfg.grid_a;
        m.b = cfg.grid_b;
        m.c = c;
        m.d = d;
        m.p_i = p;
        m.p_ij = p * p;
        experiments.push_back(grid_point(m, experiment_options(cfg.mc, index++),
                                         "grid c=" + fmt(c) + " d=" + fmt(d) + " p_i=" + fmt(p)));
      }
    }
  }
  for (std::size_t i = 0; i < cfg.comparisons.size(); ++i) {
    experiments.push_back(pair_comparison(cfg.comparisons[i], experiment_options(cfg.mc, index++),
                                          "comparison " + std::to_string(i)));
  }
  for (std::size_t i = 0; i < cfg.kdpp_cases.size(); ++i) {
    experiments.push_back(kdpp_case(cfg.kdpp_cases[i], experiment_options(cfg.mc, index++),
                                    "kdpp " + std::to_string(i)));
  }

  LabReport report;
  report.all_pass = true;
  ojson doc;
  doc["conventions"] = {{"phi", "(c (d - mu_X))^2 / 2"},
                        {"phi_alternative", "(c (d - mu_X))^2 / 4"},
                        {"min_cdf", "joint law of the indicator pair"},
                        {"standard_errors", "delete-a-group jackknife"},
                        {"ordering_se", "paired difference on common random numbers"},
                        {"ks_threshold", kKs3Sigma}};
  doc["mc"] = {{"n_draws", cfg.mc.n_draws}, {"seed", cfg.mc.seed}, {"groups", cfg.mc.groups}};
  doc["experiments"] = ojson::array();
  for (auto& e : experiments) {
    ojson item;
    item["name"] = e.name;
    for (auto& [k, v] : e.doc.items()) item[k] = v;
    item["checks"] = ojson::array();
    for (const auto& c : e.checks) {
      item["checks"].push_back(check_json(c));
      if (c.status == "fail" || c.status == "counterexample") report.all_pass = false;
      report.checks.push_back(c);
    }
    doc["experiments"].push_back(std::move(item));
  }
  doc["all_pass"] = report.all_pass;
  report.json = doc.dump(2) + "\n";
  return report;
}

}  // namespace dcrit::variance_lab
