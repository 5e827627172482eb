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

#include "hybridize/feature_map.h"

#include <cmath>

#include "hybridize/errors.h"
#include "hybridize/numerics.h"

namespace hybridize {

DenseLayer make_dense(std::size_t in, std::size_t out, SeededRng& rng) {
  DenseLayer layer{Tensor({in, out}), Tensor({1, out})};
  const double sd = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : layer.weight.data()) w = sd * rng.normal();
  return layer;
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  Tensor y = matmul(x, layer.weight);
  add_row_inplace(y, layer.bias);
  return y;
}

Tensor dense_backward(const DenseLayer& layer, const Tensor& x,
                      const Tensor& dy, DenseLayer& grad) {
  add_inplace(grad.weight, matmul_tn(x, dy));
  add_inplace(grad.bias, column_sums(dy));
  return matmul_nt(dy, layer.weight);
}

FeatureMap make_feature_map(const FeatureMapSpec& spec, SeededRng& rng) {
  if (spec.depth < 1) throw ArgumentError("feature map depth must be >= 1");
  if (spec.degree < 1) throw ArgumentError("feature map degree must be >= 1");
  if (spec.input_dim == 0) throw ArgumentError("feature map input_dim is 0");
  FeatureMap map;
  map.degree = spec.degree;
  map.slice_width = spec.resolved_slice_width();
  std::size_t in = spec.input_dim;
  for (int l = 0; l < spec.depth; ++l) {
    const std::size_t out =
        l + 1 == spec.depth ? spec.output_dim() : spec.resolved_hidden_width();
    map.layers.push_back(make_dense(in, out, rng));
    in = out;
  }
  return map;
}

void validate(const FeatureMap& map) {
  if (map.layers.empty()) throw DimensionError("feature map has no layers");
  if (map.degree < 1 || map.slice_width == 0) {
    throw DimensionError("feature map degree/slice width must be positive");
  }
  for (std::size_t l = 0; l < map.layers.size(); ++l) {
    const auto& layer = map.layers[l];
    if (layer.bias.size() != layer.out_dim()) {
      throw DimensionError("feature map layer " + std::to_string(l) +
                           ": bias width mismatch");
    }
    if (l > 0 && map.layers[l - 1].out_dim() != layer.in_dim()) {
      throw DimensionError("feature map layer " + std::to_string(l) +
                           ": input width does not chain");
    }
  }
  if (map.output_dim() !=
      static_cast<std::size_t>(map.degree) * map.slice_width) {
    throw DimensionError("feature map output width " +
                         std::to_string(map.output_dim()) +
                         " != degree * slice_width");
  }
}

namespace {

// Softplus followed by the per-slice powers.
Tensor polynomial_head(const FeatureMap& map, const Tensor& z) {
  Tensor out({z.rows(), z.cols()});
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t c = 0; c < z.cols(); ++c) {
      const int power = static_cast<int>(c / map.slice_width) + 1;
      const double a = softplus(z(i, c));
      double v = a;
      for (int p = 1; p < power; ++p) v *= a;
      out(i, c) = v;
    }
  }
  return out;
}

}  // namespace

Tensor apply_feature_map(const FeatureMap& map, const Tensor& u,
                         FeatureMapTape& tape) {
  if (u.cols() != map.input_dim()) {
    throw DimensionError("apply_feature_map: input width " +
                         std::to_string(u.cols()) + " != " +
                         std::to_string(map.input_dim()));
  }
  tape.layer_inputs.clear();
  tape.pre_activations.clear();
  Tensor h = u;
  for (std::size_t l = 0; l < map.layers.size(); ++l) {
    tape.layer_inputs.push_back(h);
    Tensor z = dense_forward(map.layers[l], h);
    tape.pre_activations.push_back(z);
    if (l + 1 < map.layers.size()) {
      for (double& x : z.data()) x = silu(x);
      h = std::move(z);
    } else {
      h = polynomial_head(map, z);
    }
  }
  require_finite(h, "apply_feature_map");
  return h;
}

Tensor apply_feature_map(const FeatureMap& map, const Tensor& u) {
  if (u.rank() == 0 || u.shape().back() != map.input_dim()) {
    throw DimensionError("apply_feature_map: last extent of " +
                         shape_string(u.shape()) + " != " +
                         std::to_string(map.input_dim()));
  }
  const std::size_t width = map.input_dim();
  const std::size_t rows = u.size() / width;
  Tensor flat({rows, width},
              std::vector<double>(u.data().begin(), u.data().end()));
  FeatureMapTape tape;
  Tensor out = apply_feature_map(map, flat, tape);
  Shape shape = u.shape();
  shape.back() = map.output_dim();
  return Tensor(std::move(shape),
                std::vector<double>(out.data().begin(), out.data().end()));
}

Tensor feature_map_backward(const FeatureMap& map, const FeatureMapTape& tape,
                            const Tensor& dout, FeatureMap& grad) {
  const std::size_t depth = map.layers.size();
  // Through the powers and softplus: d(a^p)/dz = p a^(p-1) sigmoid(z).
  const Tensor& z_last = tape.pre_activations[depth - 1];
  Tensor dz({z_last.rows(), z_last.cols()});
  for (std::size_t i = 0; i < dz.rows(); ++i) {
    for (std::size_t c = 0; c < dz.cols(); ++c) {
      const int power = static_cast<int>(c / map.slice_width) + 1;
      const double z = z_last(i, c);
      const double a = softplus(z);
      double da = power;
      for (int p = 1; p < power; ++p) da *= a;
      dz(i, c) = dout(i, c) * da * sigmoid(z);
    }
  }
  for (std::size_t l = depth; l-- > 0;) {
    Tensor dh = dense_backward(map.layers[l], tape.layer_inputs[l], dz,
                               grad.layers[l]);
    if (l == 0) return dh;
    const Tensor& z = tape.pre_activations[l - 1];
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= silu_grad(z[i]);
    dz = std::move(dh);
  }
  return dz;  // unreachable: depth >= 1
}

FeatureMapPair make_feature_map_pair(const FeatureMapSpec& spec,
                                     std::size_t heads, SeededRng& rng) {
  FeatureMapPair pair;
  for (std::size_t h = 0; h < heads; ++h) {
    pair.query.push_back(make_feature_map(spec, rng));
  }
  for (std::size_t h = 0; h < heads; ++h) {
    pair.key.push_back(make_feature_map(spec, rng));
  }
  return pair;
}

}  // namespace hybridize
