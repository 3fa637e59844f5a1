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

#include "dcrit/rl/metrics.hpp"

#include <cstdio>

#include "dcrit/errors.hpp"

namespace dcrit::rl {

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string metrics_header(int ensemble_size) {
  std::string h = "step,episode_return";
  for (int i = 0; i < ensemble_size; ++i) h += ",mean_q_" + std::to_string(i);
  h += ",cross_critic_q_std,mean_pairwise_cka,fwd_flops,bwd_flops,selected_indices";
  return h;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows, int ensemble_size) {
  out << metrics_header(ensemble_size) << '\n';
  for (const auto& row : rows) {
    if (static_cast<int>(row.mean_q.size()) != ensemble_size) {
      throw ValidationError("write_metrics_csv: row has wrong number of critics");
    }
    out << row.step << ',' << format_float(row.episode_return);
    for (double q : row.mean_q) out << ',' << format_float(q);
    out << ',' << format_float(row.cross_critic_q_std) << ','
        << format_float(row.mean_pairwise_cka) << ',' << row.fwd_flops << ','
        << row.bwd_flops << ',' << row.selected_indices << '\n';
  }
}

}  // namespace dcrit::rl
