// Copyright 2026 The MUST Authors
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

#ifndef MUST_ERRORS_HPP
#define MUST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace must {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed configuration, out-of-range hyperparameters, bad overrides.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// A pipeline stage was invoked before the stages it depends on.
class DependencyError : public Error {
 public:
  explicit DependencyError(const std::string& msg) : Error(msg) {}
};

/// Non-finite values, shape mismatches, or impossible alignments.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

}  // namespace must

#endif  // MUST_ERRORS_HPP
