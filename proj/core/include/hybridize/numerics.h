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

#ifndef HYBRIDIZE_NUMERICS_H_
#define HYBRIDIZE_NUMERICS_H_

#include <functional>
#include <span>

#include "hybridize/rng.h"
#include "hybridize/tensor.h"

namespace hybridize {

Tensor matmul(const Tensor& a, const Tensor& b);
// a^T b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// a b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
void add_inplace(Tensor& a, const Tensor& b);
// Adds the 1 x cols row `bias` to every row of `a`.
void add_row_inplace(Tensor& a, const Tensor& bias);
// Column sums as a 1 x cols tensor.
Tensor column_sums(const Tensor& a);

// exp(l - rowmax) / sum exp(l - rowmax), row by row.
Tensor row_softmax_stabilized(const Tensor& logits);

Tensor gaussian(SeededRng& rng, Shape shape);

double max_abs_diff(const Tensor& a, const Tensor& b);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
// Throws NumericError if f returns a non-finite value.
using ScalarFunction = std::function<double(std::span<const double>)>;
Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& theta,
                        double h);

// Smooth activations shared by the feature map and token MLPs.
double silu(double z);
double silu_grad(double z);
double softplus(double z);
double sigmoid(double z);

}  // namespace hybridize

#endif  // HYBRIDIZE_NUMERICS_H_
