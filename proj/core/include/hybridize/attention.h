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

#ifndef HYBRIDIZE_ATTENTION_H_
#define HYBRIDIZE_ATTENTION_H_

#include <cstddef>
#include <optional>
#include <vector>

#include "hybridize/feature_map.h"
#include "hybridize/params.h"
#include "hybridize/tensor.h"

namespace hybridize {

// Linear and hybrid denominators are clamped to at least this value.
inline constexpr double kDenominatorGuard = 1e-8;

// How the per-query stabilizer c_i = max_{j in T_S} q_i k_j / sqrt(D) enters
// the hybrid kernel.
enum class Stabilizer {
  // exp(. - c_i) on the softmax tokens only; linear terms are left unscaled,
  // so c_i shifts the softmax/linear balance.
  kLiteral,
  // Linear numerator and denominator terms are also scaled by exp(-c_i), so
  // the result equals the unstabilized mixture.
  kConsistent,
};

// Split of token indices {0..N-1} into softmax tokens T_S and linear tokens
// T_L. The strided form keeps every index that is a multiple of the rate.
class TokenPartition {
 public:
  // Arbitrary softmax set; the linear set is its complement. rate() is 0 for
  // partitions not built by partition_tokens.
  TokenPartition(std::size_t n_tokens, std::vector<std::size_t> softmax);

  std::size_t n_tokens() const { return n_tokens_; }
  int rate() const { return rate_; }
  const std::vector<std::size_t>& softmax_indices() const { return softmax_; }
  const std::vector<std::size_t>& linear_indices() const { return linear_; }

 private:
  friend TokenPartition partition_tokens(std::size_t, int);

  std::size_t n_tokens_ = 0;
  int rate_ = 0;
  std::vector<std::size_t> softmax_;
  std::vector<std::size_t> linear_;
};

// T_S = { i : i mod rate == 0 }, so |T_S| = ceil(N / rate). Throws
// ArgumentError for rate <= 0 or N == 0.
TokenPartition partition_tokens(std::size_t n_tokens, int rate);

// Projection weights for H heads. Queries/keys have D columns per head,
// values M; w_o maps the concatenated head outputs back to the model width.
struct AttentionWeights {
  Tensor w_q;  // F x (D*H)
  Tensor w_k;  // F x (D*H)
  Tensor w_v;  // F x (M*H)
  Tensor w_o;  // (M*H) x F
  std::size_t heads = 1;
  std::size_t qk_dim = 1;
  std::size_t v_dim = 1;

  std::size_t model_dim() const { return w_q.rows(); }
};

template <SameOrConst<AttentionWeights> W, class Fn>
void visit_tensors(W& w, Fn&& fn) {
  fn(w.w_q);
  fn(w.w_k);
  fn(w.w_v);
  fn(w.w_o);
}

void validate(const AttentionWeights& w);

// Per-head q (N x D), k (N x D), v (N x M).
struct Projections {
  std::vector<Tensor> q;
  std::vector<Tensor> k;
  std::vector<Tensor> v;

  std::size_t heads() const { return q.size(); }
  std::size_t tokens() const { return q.front().rows(); }
};

template <SameOrConst<Projections> P, class Fn>
void visit_tensors(P& p, Fn&& fn) {
  for (auto& t : p.q) fn(t);
  for (auto& t : p.k) fn(t);
  for (auto& t : p.v) fn(t);
}

Projections project_qkv(const Tensor& x, const AttentionWeights& w);
// Gradient of project_qkv: accumulates into the w_q/w_k/w_v slots of `grad`
// and returns dL/dx.
Tensor project_qkv_backward(const Tensor& x, const AttentionWeights& w,
                            const Projections& dproj, AttentionWeights& grad);

// Horizontal concatenation of per-head N x M outputs.
Tensor concat_heads(const std::vector<Tensor>& heads);
std::vector<Tensor> split_heads(const Tensor& joined, std::size_t heads);

// Single-head kernels.
Tensor softmax_head(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor linear_head(const Tensor& q, const Tensor& k, const Tensor& v,
                   const FeatureMap& phi_q, const FeatureMap& phi_k);
Tensor hybrid_head(const Tensor& q, const Tensor& k, const Tensor& v,
                   const FeatureMap& phi_q, const FeatureMap& phi_k,
                   const TokenPartition& part, Stabilizer mode);

// Multi-head kernels; outputs are N x (M*H), heads concatenated.
Tensor softmax_attention(const Projections& p);
Tensor linear_attention(const Projections& p, const FeatureMapPair& phi);
Tensor hybrid_attention(const Projections& p, const FeatureMapPair& phi,
                        const TokenPartition& part, Stabilizer mode);

enum class AttentionKind { kSoftmax, kLinear, kHybrid };

struct KernelConfig {
  AttentionKind kind = AttentionKind::kSoftmax;
  int rate = 1;  // hybrid only
  Stabilizer stabilizer = Stabilizer::kLiteral;

  static KernelConfig softmax() { return {}; }
  static KernelConfig linear() { return {AttentionKind::kLinear, 1, {}}; }
  static KernelConfig hybrid(int rate,
                             Stabilizer mode = Stabilizer::kLiteral) {
    return {AttentionKind::kHybrid, rate, mode};
  }
  bool needs_feature_maps() const { return kind != AttentionKind::kSoftmax; }
};

// Forward state of one head, kept for attention_backward.
struct HeadTape {
  std::vector<std::size_t> softmax_tokens;
  std::vector<std::size_t> linear_tokens;
  bool has_linear = false;
  FeatureMapTape query_tape;
  FeatureMapTape key_tape;
  Tensor phi_q;         // N x E
  Tensor phi_k;         // |T_L| x E
  Tensor kv;            // E x M, sum over T_L of phi_k(k_j)^T v_j
  Tensor ksum;          // 1 x E, sum over T_L of phi_k(k_j)
  Tensor exp_weights;   // N x |T_S|, exp(q_i k_j / sqrt(D) - c_i)
  std::vector<std::size_t> argmax;  // position in T_S attaining c_i
  std::vector<double> gain;         // 1 (literal) or exp(-c_i) (consistent)
  bool scaled_linear = false;
  std::vector<double> denominator;  // after clamping
  std::vector<char> clamped;
  Tensor out;  // N x M
};

struct AttentionTape {
  std::vector<HeadTape> heads;
};

// Evaluates the kernel selected by `kernel` through the shared mixture
// engine (softmax rows over T_S plus cached linear aggregates over T_L) and
// records what the backward pass needs. `phi` may be null for softmax.
Tensor attention_forward(const Projections& p, const FeatureMapPair* phi,
                         const KernelConfig& kernel, AttentionTape& tape);

struct AttentionGrads {
  Projections proj;
  std::optional<FeatureMapPair> phi;
};

// Gradient of attention_forward w.r.t. q, k, v and (when present) the
// feature-map parameters, given dL/d(output).
AttentionGrads attention_backward(const Projections& p,
                                  const FeatureMapPair* phi,
                                  const AttentionTape& tape,
                                  const Tensor& dout);

}  // namespace hybridize

#endif  // HYBRIDIZE_ATTENTION_H_
