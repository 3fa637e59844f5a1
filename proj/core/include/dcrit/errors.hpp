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

#ifndef DCRIT_ERRORS_HPP_
#define DCRIT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dcrit {

// Bad input: shapes, ranges, malformed configs.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration document. `line` is 1-based, 0 when unknown.
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& message, int line)
      : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Non-convergence, non-finite values, underflow.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// k-DPP requested with k larger than the numerical rank of the kernel.
class KernelRankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API called out of order (e.g. backward without a forward tape).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dcrit

#endif  // DCRIT_ERRORS_HPP_
