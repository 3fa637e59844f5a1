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

#include "dcrit/rl/config.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "dcrit/errors.hpp"

namespace dcrit::rl {

namespace {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError("'" + key + "': " + message, locate_key_line(text_, key));
  }

  template <typename T>
  T get(const json& j, const std::string& key) const {
    try {
      return j.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  int get_int(const json& j, const std::string& key) const {
    if (!j.at(key).is_number_integer()) fail(key, "expected an integer");
    return get<int>(j, key);
  }

  double get_double(const json& j, const std::string& key) const {
    if (!j.at(key).is_number()) fail(key, "expected a number");
    return get<double>(j, key);
  }

 private:
  std::string_view text_;
};

Selection parse_selection(const Reader& r, const std::string& name) {
  try {
    return selection_from_string(name);
  } catch (const ValidationError& e) {
    r.fail("selection", e.what());
  }
}

}  // namespace

int locate_key_line(std::string_view text, std::string_view key) {
  const std::string needle = "\"" + std::string(key) + "\"";
  const auto pos = text.find(needle);
  if (pos == std::string_view::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

TrainConfig parse_train_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "parse error at line L, column C".
    throw ConfigError(e.what(), 0);
  }
  if (!doc.is_object()) throw ConfigError("top level must be a JSON object", 1);

  const Reader r(json_text);
  static const std::set<std::string> kKnown = {
      "N", "k", "M", "G", "gamma", "rho", "alpha", "critic_lr", "policy_lr", "batch_size",
      "hidden_sizes", "buffer_capacity", "warmup_steps", "total_steps", "cadence",
      "eval_episodes", "selection", "target_update", "env", "seeds", "seed"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKnown.contains(key)) r.fail(key, "unknown key");
  }

  TrainConfig cfg;
  RedqConfig& q = cfg.redq;
  if (doc.contains("N")) q.ensemble_size = r.get_int(doc, "N");
  if (doc.contains("k")) q.select_k = r.get_int(doc, "k");
  if (doc.contains("M")) q.target_subset = r.get_int(doc, "M");
  if (doc.contains("G")) q.utd_ratio = r.get_int(doc, "G");
  if (doc.contains("gamma")) q.gamma = r.get_double(doc, "gamma");
  if (doc.contains("rho")) q.rho = r.get_double(doc, "rho");
  if (doc.contains("alpha")) q.alpha = r.get_double(doc, "alpha");
  if (doc.contains("critic_lr")) q.critic_lr = r.get_double(doc, "critic_lr");
  if (doc.contains("policy_lr")) q.policy_lr = r.get_double(doc, "policy_lr");
  if (doc.contains("batch_size")) q.batch_size = r.get_int(doc, "batch_size");
  if (doc.contains("hidden_sizes")) q.hidden_sizes = r.get<std::vector<int>>(doc, "hidden_sizes");
  if (doc.contains("buffer_capacity")) q.buffer_capacity = r.get_int(doc, "buffer_capacity");
  if (doc.contains("warmup_steps")) q.warmup_steps = r.get_int(doc, "warmup_steps");
  if (doc.contains("total_steps")) q.total_steps = r.get<long>(doc, "total_steps");
  if (doc.contains("cadence")) q.cadence = r.get_int(doc, "cadence");
  if (doc.contains("eval_episodes")) q.eval_episodes = r.get_int(doc, "eval_episodes");

  if (doc.contains("selection")) {
    const json& sel = doc.at("selection");
    cfg.selections.clear();
    if (sel.is_string()) {
      cfg.selections.push_back(parse_selection(r, sel.get<std::string>()));
    } else if (sel.is_array() && !sel.empty()) {
      for (const auto& item : sel) {
        if (!item.is_string()) r.fail("selection", "entries must be strings");
        const Selection s = parse_selection(r, item.get<std::string>());
        if (std::find(cfg.selections.begin(), cfg.selections.end(), s) != cfg.selections.end()) {
          r.fail("selection", "duplicate entry '" + item.get<std::string>() + "'");
        }
        cfg.selections.push_back(s);
      }
    } else {
      r.fail("selection", "expected a string or a non-empty list of strings");
    }
  }
  if (doc.contains("target_update")) {
    const auto name = r.get<std::string>(doc, "target_update");
    if (name == "selected") {
      q.target_update = TargetUpdate::kSelected;
    } else if (name == "all") {
      q.target_update = TargetUpdate::kAll;
    } else {
      r.fail("target_update", "expected \"selected\" or \"all\"");
    }
  }

  if (doc.contains("env")) {
    const json& env = doc.at("env");
    if (!env.is_object()) r.fail("env", "expected an object");
    for (const auto& [key, value] : env.items()) {
      if (key != "name" && key != "episode_length") r.fail(key, "unknown key in env");
    }
    if (env.contains("name") && r.get<std::string>(env, "name") != "point_mass") {
      r.fail("name", "only the \"point_mass\" environment is available");
    }
    if (env.contains("episode_length")) {
      cfg.env.episode_length = r.get_int(env, "episode_length");
      if (cfg.env.episode_length < 1) r.fail("episode_length", "must be >= 1");
    }
  }

  if (doc.contains("seeds") && doc.contains("seed")) {
    r.fail("seed", "give either 'seed' or 'seeds', not both");
  }
  if (doc.contains("seeds")) {
    const json& seeds = doc.at("seeds");
    if (!seeds.is_array() || seeds.empty()) r.fail("seeds", "expected a non-empty list");
    cfg.seeds.clear();
    for (const auto& s : seeds) {
      if (!s.is_number_unsigned()) r.fail("seeds", "entries must be non-negative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  } else if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) r.fail("seed", "expected a non-negative integer");
    cfg.seeds = {doc.at("seed").get<std::uint64_t>()};
  }

  try {
    q.validate();
  } catch (const ValidationError& e) {
    // validate() names fields as in the JSON document.
    const std::string msg = e.what();
    const auto open = msg.find('\'');
    const auto close = msg.find('\'', open + 1);
    const std::string key =
        open != std::string::npos && close != std::string::npos ? msg.substr(open + 1, close - open - 1) : "";
    throw ConfigError(msg, key.empty() ? 0 : locate_key_line(json_text, key));
  }
  return cfg;
}

}  // namespace dcrit::rl
