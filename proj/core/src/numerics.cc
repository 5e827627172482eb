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

#include "hybridize/numerics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hybridize/errors.h"

namespace hybridize {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data().data() + i * out.cols();
    for (std::size_t p = 0; p < k; ++p) {
      const double s = a(i, p);
      if (s == 0.0) continue;
      const double* br = b.data().data() + p * b.cols();
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul_tn: row counts differ, " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor out({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    const double* ar = a.data().data() + p * a.cols();
    const double* br = b.data().data() + p * b.cols();
    for (std::size_t i = 0; i < m; ++i) {
      const double s = ar[i];
      if (s == 0.0) continue;
      double* o = out.data().data() + i * out.cols();
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (b.cols() != a.cols()) {
    throw DimensionError("matmul_nt: column counts differ, " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  // Same accumulation order as a row-by-row dot product, but the inner loop
  // runs over contiguous memory.
  return matmul(a, transpose(b));
}

Tensor transpose(const Tensor& a) {
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& x : out.data()) x *= s;
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto o = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
}

void add_row_inplace(Tensor& a, const Tensor& bias) {
  if (bias.size() != a.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bias.shape()) +
                         " does not match " + shape_string(a.shape()));
  }
  const auto bd = bias.data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bd[j];
  }
}

Tensor column_sums(const Tensor& a) {
  Tensor out({1, a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
  return out;
}

Tensor row_softmax_stabilized(const Tensor& logits) {
  Tensor out({logits.rows(), logits.cols()});
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    auto o = out.row(i);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - peak);
      total += o[j];
    }
    for (double& x : o) x /= total;
  }
  require_finite(out, "row_softmax_stabilized");
  return out;
}

Tensor gaussian(SeededRng& rng, Shape shape) {
  Tensor out(std::move(shape));
  for (double& x : out.data()) x = rng.normal();
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    worst = std::max(worst, std::abs(ad[i] - bd[i]));
  }
  return worst;
}

Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& theta,
                        double h) {
  if (!(h > 0.0)) throw ArgumentError("finite_diff_grad: step must be > 0");
  std::vector<double> point(theta.data().begin(), theta.data().end());
  Tensor grad(theta.shape());
  auto eval = [&]() {
    const double v = f(point);
    if (!std::isfinite(v)) {
      throw NumericError("finite_diff_grad: objective is not finite");
    }
    return v;
  };
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = eval();
    point[i] = saved - h;
    const double down = eval();
    point[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double silu(double z) { return z * sigmoid(z); }

double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

double softplus(double z) {
  // log1p(exp(z)) without overflow for large z.
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace hybridize
