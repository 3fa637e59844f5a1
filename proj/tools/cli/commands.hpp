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

#ifndef DCRIT_TOOLS_CLI_COMMANDS_HPP_
#define DCRIT_TOOLS_CLI_COMMANDS_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace dcrit::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigError = 2,
  kNumericAbort = 3,
  kKernelRank = 4,
};

struct GlobalOptions {
  std::filesystem::path out_dir = ".";
  std::optional<int> threads;
};

int cmd_train(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
              std::ostream& err);
int cmd_dpp_check(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
                  std::ostream& err);
int cmd_variance_lab(const std::string& config_path, const GlobalOptions& g, std::ostream& out,
                     std::ostream& err);

struct CkaOptions {
  std::optional<double> rbf_sigma;
};
int cmd_cka(const std::string& csv_a, const std::string& csv_b, const CkaOptions& opts,
            std::ostream& out, std::ostream& err);

// Full argv entry point; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace dcrit::cli

#endif  // DCRIT_TOOLS_CLI_COMMANDS_HPP_
