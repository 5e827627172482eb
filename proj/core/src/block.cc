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

#include "hybridize/block.h"

#include "hybridize/errors.h"
#include "hybridize/numerics.h"

namespace hybridize {

void validate(const BlockParams& block) {
  validate(block.attention);
  const std::size_t f = block.attention.model_dim();
  if (block.ffn.in.in_dim() != f || block.ffn.out.out_dim() != f ||
      block.ffn.in.out_dim() != block.ffn.out.in_dim()) {
    throw DimensionError("block MLP widths do not match the model width");
  }
  const bool wants_phi = block.kernel.needs_feature_maps();
  if (wants_phi != block.phi.has_value()) {
    throw ArgumentError(wants_phi ? "linear/hybrid block lacks feature maps"
                                  : "softmax block carries feature maps");
  }
  if (block.kernel.kind == AttentionKind::kHybrid && block.kernel.rate < 1) {
    throw ArgumentError("hybrid block rate must be >= 1");
  }
  if (block.phi) {
    if (block.phi->query.size() != block.attention.heads ||
        block.phi->key.size() != block.attention.heads) {
      throw DimensionError("feature map head count != attention heads");
    }
    for (const auto* maps : {&block.phi->query, &block.phi->key}) {
      for (const auto& m : *maps) {
        validate(m);
        if (m.input_dim() != block.attention.qk_dim) {
          throw DimensionError("feature map input width != qk head width");
        }
      }
    }
  }
}

BlockParams make_softmax_block(const BlockDims& dims, SeededRng& rng) {
  const std::size_t dh = dims.qk_dim * dims.heads;
  const std::size_t mh = dims.v_dim * dims.heads;
  BlockParams block;
  block.attention.heads = dims.heads;
  block.attention.qk_dim = dims.qk_dim;
  block.attention.v_dim = dims.v_dim;
  block.attention.w_q = make_dense(dims.model_dim, dh, rng).weight;
  block.attention.w_k = make_dense(dims.model_dim, dh, rng).weight;
  block.attention.w_v = make_dense(dims.model_dim, mh, rng).weight;
  block.attention.w_o = make_dense(mh, dims.model_dim, rng).weight;
  block.ffn.in = make_dense(dims.model_dim, dims.mlp_hidden, rng);
  block.ffn.out = make_dense(dims.mlp_hidden, dims.model_dim, rng);
  return block;
}

Tensor block_attention(const BlockParams& block, const Tensor& x) {
  const Projections p = project_qkv(x, block.attention);
  switch (block.kernel.kind) {
    case AttentionKind::kSoftmax:
      return softmax_attention(p);
    case AttentionKind::kLinear:
      return linear_attention(p, block.phi.value());
    case AttentionKind::kHybrid:
      return hybrid_attention(p, block.phi.value(),
                              partition_tokens(x.rows(), block.kernel.rate),
                              block.kernel.stabilizer);
  }
  throw ArgumentError("unknown attention kind");
}

namespace {

Tensor apply_mlp(const TokenMlp& mlp, const Tensor& mixed, Tensor* pre,
                 Tensor* hidden) {
  Tensor z = dense_forward(mlp.in, mixed);
  Tensor h = z;
  for (double& v : h.data()) v = silu(v);
  Tensor out = dense_forward(mlp.out, h);
  if (pre) *pre = std::move(z);
  if (hidden) *hidden = std::move(h);
  return out;
}

}  // namespace

Tensor block_forward(const BlockParams& block, const Tensor& x) {
  validate(block);
  Tensor mixed = matmul(block_attention(block, x), block.attention.w_o);
  add_inplace(mixed, x);
  Tensor out = apply_mlp(block.ffn, mixed, nullptr, nullptr);
  require_finite(out, "block_forward");
  return out;
}

Tensor block_forward(const BlockParams& block, const Tensor& x,
                     BlockTape& tape) {
  validate(block);
  tape.input = x;
  tape.proj = project_qkv(x, block.attention);
  tape.attention_out = attention_forward(
      tape.proj, block.phi ? &*block.phi : nullptr, block.kernel,
      tape.attention);
  tape.mixed = matmul(tape.attention_out, block.attention.w_o);
  add_inplace(tape.mixed, x);
  Tensor out = apply_mlp(block.ffn, tape.mixed, &tape.hidden_pre, &tape.hidden);
  require_finite(out, "block_forward");
  return out;
}

Tensor block_backward(const BlockParams& block, const BlockTape& tape,
                      const Tensor& dout, BlockParams& grad) {
  Tensor dhidden = dense_backward(block.ffn.out, tape.hidden, dout,
                                  grad.ffn.out);
  for (std::size_t i = 0; i < dhidden.size(); ++i) {
    dhidden[i] *= silu_grad(tape.hidden_pre[i]);
  }
  Tensor dmixed = dense_backward(block.ffn.in, tape.mixed, dhidden,
                                 grad.ffn.in);
  // Residual: dx starts as dmixed.
  Tensor dx = dmixed;
  add_inplace(grad.attention.w_o, matmul_tn(tape.attention_out, dmixed));
  const Tensor dattn = matmul_nt(dmixed, block.attention.w_o);
  AttentionGrads ag = attention_backward(
      tape.proj, block.phi ? &*block.phi : nullptr, tape.attention, dattn);
  if (ag.phi) accumulate_params(*grad.phi, *ag.phi);
  add_inplace(dx, project_qkv_backward(tape.input, block.attention, ag.proj,
                                       grad.attention));
  return dx;
}

}  // namespace hybridize
