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

#ifndef HYBRIDIZE_BLOCK_H_
#define HYBRIDIZE_BLOCK_H_

#include <optional>

#include "hybridize/attention.h"
#include "hybridize/feature_map.h"
#include "hybridize/params.h"

namespace hybridize {

// Token-wise f(r) = silu(r W1 + b1) W2 + b2.
struct TokenMlp {
  DenseLayer in;
  DenseLayer out;
};

template <SameOrConst<TokenMlp> T, class Fn>
void visit_tensors(T& mlp, Fn&& fn) {
  visit_tensors(mlp.in, fn);
  visit_tensors(mlp.out, fn);
}

// One transformer block, T(x) = f(A(x) + x) with A(x) = attn(x) w_o.
// Feature maps are present exactly when the kernel is linear or hybrid.
struct BlockParams {
  AttentionWeights attention;
  TokenMlp ffn;
  std::optional<FeatureMapPair> phi;
  KernelConfig kernel;
};

template <SameOrConst<BlockParams> B, class Fn>
void visit_tensors(B& block, Fn&& fn) {
  visit_tensors(block.attention, fn);
  visit_tensors(block.ffn, fn);
  if (block.phi) visit_tensors(*block.phi, fn);
}

void validate(const BlockParams& block);

struct BlockDims {
  std::size_t model_dim = 32;
  std::size_t heads = 2;
  std::size_t qk_dim = 8;
  std::size_t v_dim = 8;
  std::size_t mlp_hidden = 64;
};

BlockParams make_softmax_block(const BlockDims& dims, SeededRng& rng);

// The raw attention output attn(x), N x (M*H), before w_o. This is the
// quantity distillation matches.
Tensor block_attention(const BlockParams& block, const Tensor& x);
Tensor block_forward(const BlockParams& block, const Tensor& x);

struct BlockTape {
  Tensor input;
  Projections proj;
  AttentionTape attention;
  Tensor attention_out;  // N x (M*H)
  Tensor mixed;          // A(x) + x
  Tensor hidden_pre;     // mixed W1 + b1
  Tensor hidden;         // silu(hidden_pre)
};

// Same result as block_forward, evaluated through the mixture engine, with
// a tape for block_backward.
Tensor block_forward(const BlockParams& block, const Tensor& x,
                     BlockTape& tape);
// Accumulates parameter gradients into `grad` (same structure as `block`)
// and returns dL/dx.
Tensor block_backward(const BlockParams& block, const BlockTape& tape,
                      const Tensor& dout, BlockParams& grad);

}  // namespace hybridize

#endif  // HYBRIDIZE_BLOCK_H_
