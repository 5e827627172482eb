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

#ifndef HYBRIDIZE_FEATURE_MAP_H_
#define HYBRIDIZE_FEATURE_MAP_H_

#include <cstddef>
#include <vector>

#include "hybridize/params.h"
#include "hybridize/rng.h"
#include "hybridize/tensor.h"

namespace hybridize {

// y = x W + b with W shaped in x out and b shaped 1 x out.
struct DenseLayer {
  Tensor weight;
  Tensor bias;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
};

template <SameOrConst<DenseLayer> L, class Fn>
void visit_tensors(L& layer, Fn&& fn) {
  fn(layer.weight);
  fn(layer.bias);
}

// Weights ~ N(0, 1/fan_in), biases zero.
DenseLayer make_dense(std::size_t in, std::size_t out, SeededRng& rng);
Tensor dense_forward(const DenseLayer& layer, const Tensor& x);
// Accumulates dW and db into `grad`, returns dL/dx.
Tensor dense_backward(const DenseLayer& layer, const Tensor& x,
                      const Tensor& dy, DenseLayer& grad);

struct FeatureMapSpec {
  std::size_t input_dim = 8;
  int degree = 2;
  // Zero means "same as input_dim".
  std::size_t slice_width = 0;
  int depth = 2;
  // Zero means "same as the output width, degree * slice_width".
  std::size_t hidden_width = 0;

  std::size_t resolved_slice_width() const {
    return slice_width ? slice_width : input_dim;
  }
  std::size_t output_dim() const {
    return static_cast<std::size_t>(degree) * resolved_slice_width();
  }
  std::size_t resolved_hidden_width() const {
    return hidden_width ? hidden_width : output_dim();
  }
};

// Learnable non-negative feature map for one head.
//
//   z   = MLP(u)                 SiLU between layers, no activation on the last
//   a   = softplus(z)            a(z) = ln(1 + e^z) > 0
//   out = [a_1^1, a_2^2, ..., a_P^P]
//
// where a_p is the p-th slice of width slice_width. Every output entry is
// non-negative for any finite weights.
struct FeatureMap {
  std::vector<DenseLayer> layers;
  int degree = 1;
  std::size_t slice_width = 0;

  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }
};

template <SameOrConst<FeatureMap> M, class Fn>
void visit_tensors(M& map, Fn&& fn) {
  for (auto& layer : map.layers) visit_tensors(layer, fn);
}

FeatureMap make_feature_map(const FeatureMapSpec& spec, SeededRng& rng);
// Throws DimensionError unless layers chain and the last width is
// degree * slice_width.
void validate(const FeatureMap& map);

// Intermediate values needed by feature_map_backward.
struct FeatureMapTape {
  std::vector<Tensor> layer_inputs;
  std::vector<Tensor> pre_activations;
};

// `u` may have any rank; its last extent must equal input_dim(). The result
// keeps the leading extents and replaces the last with output_dim().
Tensor apply_feature_map(const FeatureMap& map, const Tensor& u);
// Rank-2 form that records a tape.
Tensor apply_feature_map(const FeatureMap& map, const Tensor& u,
                         FeatureMapTape& tape);
// Accumulates parameter gradients into `grad`; returns dL/du.
Tensor feature_map_backward(const FeatureMap& map, const FeatureMapTape& tape,
                            const Tensor& dout, FeatureMap& grad);

// Separate query and key maps, one of each per head.
struct FeatureMapPair {
  std::vector<FeatureMap> query;
  std::vector<FeatureMap> key;

  std::size_t heads() const { return query.size(); }
};

template <SameOrConst<FeatureMapPair> P, class Fn>
void visit_tensors(P& pair, Fn&& fn) {
  for (auto& m : pair.query) visit_tensors(m, fn);
  for (auto& m : pair.key) visit_tensors(m, fn);
}

FeatureMapPair make_feature_map_pair(const FeatureMapSpec& spec,
                                     std::size_t heads, SeededRng& rng);

}  // namespace hybridize

#endif  // HYBRIDIZE_FEATURE_MAP_H_
