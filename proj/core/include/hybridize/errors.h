// Copyright 2026 The Hybridize Authors
// SPDX-License-Identifier: Apache-2.0
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

#ifndef HYBRIDIZE_ERRORS_H_
#define HYBRIDIZE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace hybridize {

// Root of every error thrown by the library. Subclasses map one-to-one onto
// the failure classes callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or widths that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Out-of-domain scalar arguments (rates, counts, step sizes).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training loss left the sane range.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// No assignment fits the budget; carries the cheapest achievable cost.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double minimal_cost)
      : Error(what), minimal_cost_(minimal_cost) {}
  double minimal_cost() const { return minimal_cost_; }

 private:
  double minimal_cost_;
};

// A feature-map checkpoint is absent or does not match the model.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Malformed or schema-violating configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybridize

#endif  // HYBRIDIZE_ERRORS_H_
