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

#include "cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcrit/dpp.hpp"
#include "dcrit/errors.hpp"
#include "dcrit/kernel.hpp"
#include "dcrit/log.hpp"
#include "dcrit/rl/config.hpp"
#include "dcrit/rl/metrics.hpp"
#include "dcrit/rl/redq.hpp"
#include "dcrit/rng.hpp"
#include "dcrit/variance_lab.hpp"

namespace dcrit::cli {

namespace {

using ojson = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
}

// Maps exceptions onto the exit-code contract.
template <typename Body>
int guarded(const std::string& what, std::ostream& err, Body body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << what << ": config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ValidationError& e) {
    err << what << ": invalid input: " << e.what() << "\n";
    return kConfigError;
  } catch (const KernelRankError& e) {
    err << what << ": insufficient kernel rank: " << e.what() << "\n";
    return kKernelRank;
  } catch (const NumericError& e) {
    err << what << ": numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const std::exception& e) {
    err << what << ": runtime abort: " << e.what() << "\n";
    return kNumericAbort;
  }
}

int thread_count(const GlobalOptions& g, int fallback = 1) {
  return std::max(1, g.threads.value_or(fallback));
}

// Runs tasks [0, n) on `threads` workers. The first exception is rethrown
// after all workers stop.
template <typename Task>
void parallel_for(int n, int threads, Task task) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int workers = std::max(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---- dpp-check -------------------------------------------------------------

struct DppCheckConfig {
  linalg::SymMatrix kernel = linalg::SymMatrix::identity(6);
  int k = 3;
  long draws = 200000;
  std::uint64_t seed = 0;
  double tv_threshold = 0.01;
};

DppCheckConfig parse_dpp_check(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ConfigError(e.what(), 0);
  }
  auto fail = [&](const std::string& key, const std::string& msg) {
    throw ConfigError("'" + key + "': " + msg, rl::locate_key_line(text, key));
  };
  if (!doc.is_object()) fail("document", "expected an object");
  for (const auto& [key, value] : doc.items()) {
    static const std::vector<std::string> known{"kernel", "identity_n", "k", "draws", "seed",
                                                "tv_threshold"};
    if (std::find(known.begin(), known.end(), key) == known.end()) fail(key, "unknown key");
  }
  DppCheckConfig cfg;
  if (doc.contains("kernel") && doc.contains("identity_n")) fail("kernel", "give either kernel or identity_n");
  if (doc.contains("kernel")) {
    const ojson& rows = doc.at("kernel");
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
      cfg.kernel = linalg::SymMatrix(l);
    } catch (const ValidationError& e) {
      fail("kernel", e.what());
    }
  } else if (doc.contains("identity_n")) {
    if (!doc.at("identity_n").is_number_integer()) fail("identity_n", "expected an integer");
    const int n = doc.at("identity_n").get<int>();
    if (n < 1) fail("identity_n", "expected a positive integer");
    cfg.kernel = linalg::SymMatrix::identity(n);
  }
  if (cfg.kernel.size() > 12) fail(doc.contains("kernel") ? "kernel" : "identity_n", "N must be <= 12");
  if (doc.contains("k")) {
    if (!doc.at("k").is_number_integer()) fail("k", "expected an integer");
    cfg.k = doc.at("k").get<int>();
  }
  if (cfg.k < 1) fail("k", "expected k >= 1");
  if (cfg.k > cfg.kernel.size()) fail("k", "k exceeds the kernel size N");
  if (doc.contains("draws")) {
    if (!doc.at("draws").is_number_integer() || doc.at("draws").get<long>() < 1) {
      fail("draws", "expected a positive integer");
    }
    cfg.draws = doc.at("draws").get<long>();
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) fail("seed", "expected a non-negative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("tv_threshold")) {
    if (!doc.at("tv_threshold").is_number() || doc.at("tv_threshold").get<double>() < 0.0) {
      fail("tv_threshold", "expected a non-negative number");
    }
    cfg.tv_threshold = doc.at("tv_threshold").get<double>();
  }
  return cfg;
}

}  // namespace

int cmd_dpp_check(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
                  std::ostream& err) {
  return guarded("dpp-check", err, [&] {
    const DppCheckConfig cfg = parse_dpp_check(read_file(config_path));
    const linalg::SymMatrix psd = linalg::nearest_psd(cfg.kernel);
    const dpp::SubsetDistribution exact = dpp::kdpp_prob_bruteforce(psd, cfg.k);
    const dpp::KDppSampler sampler(psd, cfg.k);

    // Fixed-size chunks with their own streams keep counts independent of
    // the thread count.
    constexpr long kChunk = 10000;
    const int chunks = static_cast<int>((cfg.draws + kChunk - 1) / kChunk);
    std::vector<std::map<dpp::IndexSet, long long>> partial(static_cast<std::size_t>(chunks));
    const SeededRng root(cfg.seed);
    parallel_for(chunks, thread_count(g), [&](int c) {
      SeededRng rng = root.derive(static_cast<std::uint64_t>(c));
      const long n = std::min(kChunk, cfg.draws - kChunk * c);
      auto& counts = partial[static_cast<std::size_t>(c)];
      for (long i = 0; i < n; ++i) ++counts[sampler.sample(rng)];
    });
    std::map<dpp::IndexSet, long long> counts;
    for (const auto& p : partial) {
      for (const auto& [set, n] : p) counts[set] += n;
    }
    const double tv = dpp::total_variation(exact, counts, cfg.draws);

    out << "subset\texact\tempirical\n";
    for (const auto& [set, p] : exact) {
      const auto it = counts.find(set);
      const double freq = it == counts.end() ? 0.0 : static_cast<double>(it->second) / cfg.draws;
      out << "{" << set.to_string(',') << "}\t" << fixed(p) << "\t" << fixed(freq) << "\n";
    }
    const bool pass = tv <= cfg.tv_threshold;
    out << "N=" << psd.size() << " k=" << cfg.k << " draws=" << cfg.draws << " tv=" << fixed(tv)
        << " threshold=" << cfg.tv_threshold << " " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? kOk : kCheckFailed;
  });
}

int cmd_variance_lab(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
                     std::ostream& err) {
  return guarded("variance-lab", err, [&] {
    variance_lab::LabConfig cfg = variance_lab::parse_lab_config(read_file(config_path));
    if (g.threads) cfg.mc.threads = std::max(1, *g.threads);
    const variance_lab::LabReport report = variance_lab::run_lab(cfg);
    ensure_dir(g.out_dir);
    write_file(g.out_dir / "variance_lab.json", report.json);
    for (const auto& c : report.checks) {
      if (c.status == "info" && c.name != "phi_convention") continue;
      out << c.experiment << "\t" << c.name << "\t" << c.status << "\tobserved=" << c.observed
          << "\texpected=" << c.expected << "\tse=" << c.se;
      if (!c.note.empty()) out << "\t" << c.note;
      out << "\n";
    }
    out << (report.all_pass ? "all checks pass" : "some checks failed") << "; report written to "
        << (g.out_dir / "variance_lab.json").string() << "\n";
    return report.all_pass ? kOk : kCheckFailed;
  });
}

int cmd_train(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
              std::ostream& err) {
  return guarded("train", err, [&] {
    const rl::TrainConfig cfg = rl::parse_train_config(read_file(config_path));
    ensure_dir(g.out_dir);

    struct Task {
      rl::Selection selection;
      std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto sel : cfg.selections) {
      for (const auto seed : cfg.seeds) tasks.push_back({sel, seed});
    }
    std::vector<rl::RunMetrics> results(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), thread_count(g), [&](int i) {
      const Task& t = tasks[static_cast<std::size_t>(i)];
      rl::RedqConfig rc = cfg.redq;
      rc.selection = t.selection;
      rl::RunMetrics m = rl::train(rc, t.seed, cfg.env);
      std::ostringstream csv;
      rl::write_metrics_csv(csv, m.rows, rc.ensemble_size);
      write_file(g.out_dir / (rl::to_string(t.selection) + "_seed" + std::to_string(t.seed) + ".csv"),
                 csv.str());
      results[static_cast<std::size_t>(i)] = std::move(m);
    });

    const std::uint64_t c_c = results.front().critic_step_bwd;
    const std::uint64_t c_p = results.front().policy_step_bwd;
    const auto n = static_cast<std::uint64_t>(cfg.redq.ensemble_size);
    const auto k = static_cast<std::uint64_t>(cfg.redq.select_k);

    ojson summary;
    summary["ledger"] = {
        {"C_c", c_c},
        {"C_p", c_p},
        {"predicted_bwd_ratio_selected_vs_all",
         static_cast<double>(k * c_c + c_p) / static_cast<double>(n * c_c + c_p)},
        {"critic_only_bwd_ratio", static_cast<double>(k) / static_cast<double>(n)}};
    std::map<rl::Selection, std::uint64_t> bwd_totals;
    std::map<rl::Selection, std::uint64_t> critic_bwd_totals;
    ojson variants = ojson::object();
    for (const auto sel : cfg.selections) {
      std::vector<double> finals;
      ojson per_seed = ojson::array();
      std::uint64_t fwd = 0, bwd = 0, critic_bwd = 0;
      long fallbacks = 0;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].selection != sel) continue;
        const rl::RunMetrics& m = results[i];
        finals.push_back(m.final_return);
        fwd += m.ledger.total().forward_flops;
        bwd += m.ledger.total().backward_flops;
        critic_bwd += m.ledger.critic.backward_flops;
        fallbacks += m.selection.dpp_fallbacks;
        per_seed.push_back({{"seed", tasks[i].seed},
                            {"final_return", m.final_return},
                            {"fwd_flops", m.ledger.total().forward_flops},
                            {"bwd_flops", m.ledger.total().backward_flops},
                            {"critic_bwd_flops", m.ledger.critic.backward_flops},
                            {"policy_bwd_flops", m.ledger.policy.backward_flops},
                            {"update_rounds", m.update_rounds},
                            {"dpp_fallbacks", m.selection.dpp_fallbacks}});
      }
      bwd_totals[sel] = bwd;
      critic_bwd_totals[sel] = critic_bwd;
      const double se = finals.size() > 1 ? stddev_of(finals) / std::sqrt(static_cast<double>(finals.size())) : 0.0;
      variants[rl::to_string(sel)] = {{"mean_final_return", mean_of(finals)},
                                      {"std_final_return", stddev_of(finals)},
                                      {"se_final_return", se},
                                      {"total_fwd_flops", fwd},
                                      {"total_bwd_flops", bwd},
                                      {"total_critic_bwd_flops", critic_bwd},
                                      {"dpp_fallbacks", fallbacks},
                                      {"seeds", per_seed}};
    }
    if (bwd_totals.count(rl::Selection::kAll) != 0) {
      for (const auto sel : cfg.selections) {
        auto& v = variants[rl::to_string(sel)];
        v["bwd_flop_ratio_vs_all"] =
            static_cast<double>(bwd_totals[sel]) / static_cast<double>(bwd_totals[rl::Selection::kAll]);
        v["critic_bwd_flop_ratio_vs_all"] = static_cast<double>(critic_bwd_totals[sel]) /
                                            static_cast<double>(critic_bwd_totals[rl::Selection::kAll]);
      }
    }
    summary["variants"] = variants;
    write_file(g.out_dir / "summary.json", summary.dump(2) + "\n");

    out << "selection\tmean_final_return\tse\ttotal_bwd_flops\tbwd_ratio_vs_all\n";
    for (const auto sel : cfg.selections) {
      const auto& v = variants[rl::to_string(sel)];
      out << rl::to_string(sel) << "\t" << fixed(v["mean_final_return"].get<double>(), 4) << "\t"
          << fixed(v["se_final_return"].get<double>(), 4) << "\t" << v["total_bwd_flops"].get<std::uint64_t>()
          << "\t" << (v.contains("bwd_flop_ratio_vs_all") ? fixed(v["bwd_flop_ratio_vs_all"].get<double>()) : "-")
          << "\n";
    }
    out << "C_c=" << c_c << " C_p=" << c_p << "; summary written to " << (g.out_dir / "summary.json").string()
        << "\n";
    return kOk;
  });
}

namespace {

kernel::ActivationMatrix read_activation_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    bool numeric = true;
    while (std::getline(fields, field, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw ConfigError(path + ": non-numeric field", line_no);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(path + ": ragged row", line_no);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no data rows", 0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return kernel::ActivationMatrix(std::move(x));
}

}  // namespace

int cmd_cka(const std::string& csv_a, const std::string& csv_b, const CkaOptions& opts,
            std::ostream& out, std::ostream& err) {
  return guarded("cka", err, [&] {
    const kernel::ActivationMatrix a = read_activation_csv(csv_a);
    const kernel::ActivationMatrix b = read_activation_csv(csv_b);
    if (a.rows() != b.rows()) {
      throw ValidationError("row counts differ (" + std::to_string(a.rows()) + " vs " +
                            std::to_string(b.rows()) + ")");
    }
    const kernel::KernelSpec spec =
        opts.rbf_sigma ? kernel::KernelSpec::rbf(*opts.rbf_sigma) : kernel::KernelSpec::linear();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12f", kernel::cka(a, b, spec));
    out << buf << "\n";
    return kOk;
  });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"dcrit: diverse critic selection experiments"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::string out_dir = ".";
  int threads = 0;
  bool verbose = false;
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  std::string config_path;
  auto* train = app.add_subcommand("train", "Run training experiments");
  train->add_option("config", config_path, "JSON run config")->required();
  auto* dpp_check = app.add_subcommand("dpp-check", "Compare k-DPP samples with exact probabilities");
  dpp_check->add_option("config", config_path, "JSON config")->required();
  auto* lab = app.add_subcommand("variance-lab", "Closed-form vs Monte-Carlo variance checks");
  lab->add_option("config", config_path, "JSON config")->required();
  std::string csv_a, csv_b;
  CkaOptions cka_opts;
  double sigma = 0.0;
  auto* cka = app.add_subcommand("cka", "Linear (or RBF) CKA between two activation CSVs");
  cka->add_option("a", csv_a, "CSV, rows are examples")->required();
  cka->add_option("b", csv_b, "CSV, rows are examples")->required();
  auto* sigma_opt = cka->add_option("--rbf-sigma", sigma, "Use an RBF kernel with this bandwidth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  g.out_dir = out_dir;
  if (threads_opt->count() > 0) g.threads = threads;
  if (verbose) log::set_level(log::Level::kInfo);
  if (sigma_opt->count() > 0) cka_opts.rbf_sigma = sigma;

  if (*train) return cmd_train(config_path, g, out, err);
  if (*dpp_check) return cmd_dpp_check(config_path, g, out, err);
  if (*lab) return cmd_variance_lab(config_path, g, out, err);
  return cmd_cka(csv_a, csv_b, cka_opts, out, err);
}

}  // namespace dcrit::cli
