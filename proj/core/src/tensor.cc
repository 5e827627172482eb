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

#include "hybridize/tensor.h"

#include <atomic>
#include <cmath>
#include <sstream>

#include "hybridize/errors.h"

namespace hybridize {
namespace {

std::atomic<bool> g_checked{true};

}  // namespace

bool checked_mode() { return g_checked.load(std::memory_order_relaxed); }

void set_checked_mode(bool enabled) {
  g_checked.store(enabled, std::memory_order_relaxed);
}

ScopedCheckedMode::ScopedCheckedMode(bool enabled) : previous_(checked_mode()) {
  set_checked_mode(enabled);
}

ScopedCheckedMode::~ScopedCheckedMode() { set_checked_mode(previous_); }

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor shape " + shape_string(shape_) +
                                     " has a zero extent");
  }
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor shape " + shape_string(shape_) +
                                     " has a zero extent");
  }
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
  require_finite(*this, "Tensor construction");
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

void Tensor::throw_not_matrix() const {
  throw DimensionError("expected a rank-2 tensor, got " + shape_string(shape_));
}

void Tensor::fill(double value) {
  for (double& x : data_) x = value;
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, const char* where) {
  if (checked_mode() && !t.all_finite()) {
    throw NumericError(std::string(where) + ": non-finite value in tensor " +
                       shape_string(t.shape()));
  }
}

}  // namespace hybridize
