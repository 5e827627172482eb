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

#ifndef HYBRIDIZE_PARAMS_H_
#define HYBRIDIZE_PARAMS_H_

#include <concepts>
#include <span>
#include <type_traits>
#include <vector>

#include "hybridize/errors.h"
#include "hybridize/tensor.h"

namespace hybridize {

// Matches T and const T. Parameter containers expose
// `visit_tensors(container, fn)` overloads constrained on this so a single
// definition serves both read-only and mutating walks.
template <class T, class U>
concept SameOrConst = std::same_as<std::remove_const_t<T>, U>;

template <class T>
std::vector<double> flatten_params(const T& params) {
  std::vector<double> flat;
  visit_tensors(params, [&](const Tensor& t) {
    flat.insert(flat.end(), t.data().begin(), t.data().end());
  });
  return flat;
}

template <class T>
void assign_params(T& params, std::span<const double> flat) {
  std::size_t pos = 0;
  visit_tensors(params, [&](Tensor& t) {
    auto d = t.data();
    if (pos + d.size() > flat.size()) {
      throw DimensionError("assign_params: flat vector too short");
    }
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = flat[pos + i];
    pos += d.size();
  });
  if (pos != flat.size()) {
    throw DimensionError("assign_params: flat vector too long");
  }
}

template <class T>
std::size_t param_count(const T& params) {
  std::size_t n = 0;
  visit_tensors(params, [&](const Tensor& t) { n += t.size(); });
  return n;
}

// Same structure, every entry zero. Used as a gradient accumulator.
template <class T>
T zeros_like(const T& params) {
  T out = params;
  visit_tensors(out, [](Tensor& t) { t.fill(0.0); });
  return out;
}

// dst += scale * src, entry by entry; both must share one structure.
template <class T>
void accumulate_params(T& dst, const T& src, double scale = 1.0) {
  std::vector<const Tensor*> parts;
  visit_tensors(src, [&](const Tensor& t) { parts.push_back(&t); });
  std::size_t pos = 0;
  visit_tensors(dst, [&](Tensor& t) {
    if (pos >= parts.size() || parts[pos]->size() != t.size()) {
      throw DimensionError("accumulate_params: structures differ");
    }
    auto d = t.data();
    const auto s = parts[pos++]->data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
  });
  if (pos != parts.size()) {
    throw DimensionError("accumulate_params: structures differ");
  }
}

}  // namespace hybridize

#endif  // HYBRIDIZE_PARAMS_H_
