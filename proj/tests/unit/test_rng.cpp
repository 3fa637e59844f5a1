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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dcrit/errors.hpp"
#include "dcrit/rng.hpp"

using dcrit::SeededRng;

TEST_CASE("engine matches the standard mt19937_64 sequence") {
  SeededRng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("same seed, same draws; derive is a pure function") {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
  const SeededRng root(7);
  SeededRng c1 = root.derive(3), c2 = root.derive(3), c3 = root.derive(4);
  CHECK(c1.next_u64() == c2.next_u64());
  CHECK(c1.next_u64() != c3.next_u64());
}

TEST_CASE("uniform stays in [0, 1) with the right moments") {
  SeededRng rng(1);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    ss += u * u;
  }
  const double mean = s / n;
  CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(ss / n - mean * mean - 1.0 / 12.0) < 2e-3);
}

TEST_CASE("normal has zero mean and unit variance") {
  SeededRng rng(2);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(ss / n - 1.0) < 0.02);
}

TEST_CASE("uniform_index covers every bucket evenly") {
  SeededRng rng(3);
  const int buckets = 7, n = 70000;
  std::vector<int> counts(buckets, 0);
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_index(buckets)];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  CHECK(chi2 < 22.46);  // chi-square(6) upper 0.1%
  CHECK_THROWS_AS(rng.uniform_index(0), dcrit::ValidationError);
}

TEST_CASE("choose_subset returns sorted distinct members, uniformly") {
  SeededRng rng(4);
  std::map<std::vector<int>, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const auto s = rng.choose_subset(5, 2);
    REQUIRE(s.size() == 2);
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    REQUIRE(std::set<int>(s.begin(), s.end()).size() == 2);
    ++counts[s];
  }
  CHECK(counts.size() == 10);
  for (const auto& [s, c] : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.1) < 0.006);
  CHECK(rng.choose_subset(4, 0).empty());
  CHECK(rng.choose_subset(4, 4) == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(rng.choose_subset(3, 4), dcrit::ValidationError);
}
