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

#include "hybridize/attention.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hybridize/errors.h"
#include "hybridize/numerics.h"

namespace hybridize {

TokenPartition::TokenPartition(std::size_t n_tokens,
                               std::vector<std::size_t> softmax)
    : n_tokens_(n_tokens), softmax_(std::move(softmax)) {
  if (n_tokens == 0) throw ArgumentError("TokenPartition: no tokens");
  std::sort(softmax_.begin(), softmax_.end());
  if (std::adjacent_find(softmax_.begin(), softmax_.end()) != softmax_.end()) {
    throw ArgumentError("TokenPartition: duplicate softmax index");
  }
  if (!softmax_.empty() && softmax_.back() >= n_tokens) {
    throw ArgumentError("TokenPartition: softmax index out of range");
  }
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    if (s < softmax_.size() && softmax_[s] == i) {
      ++s;
    } else {
      linear_.push_back(i);
    }
  }
}

TokenPartition partition_tokens(std::size_t n_tokens, int rate) {
  if (rate <= 0) {
    throw ArgumentError("partition_tokens: rate must be positive, got " +
                        std::to_string(rate));
  }
  if (n_tokens == 0) throw ArgumentError("partition_tokens: no tokens");
  std::vector<std::size_t> softmax;
  for (std::size_t i = 0; i < n_tokens; i += static_cast<std::size_t>(rate)) {
    softmax.push_back(i);
  }
  TokenPartition part(n_tokens, std::move(softmax));
  part.rate_ = rate;
  return part;
}

void validate(const AttentionWeights& w) {
  const std::size_t f = w.w_q.rows();
  const std::size_t dh = w.qk_dim * w.heads;
  const std::size_t mh = w.v_dim * w.heads;
  if (w.heads == 0 || w.qk_dim == 0 || w.v_dim == 0) {
    throw DimensionError("attention weights: zero head count or head width");
  }
  if (w.w_q.cols() != dh || w.w_k.cols() != dh || w.w_k.rows() != f) {
    throw DimensionError("attention weights: w_q/w_k must be F x (D*H)");
  }
  if (w.w_v.rows() != f || w.w_v.cols() != mh) {
    throw DimensionError("attention weights: w_v must be F x (M*H)");
  }
  if (w.w_o.rows() != mh || w.w_o.cols() != f) {
    throw DimensionError("attention weights: w_o must be (M*H) x F");
  }
}

namespace {

Tensor column_block(const Tensor& a, std::size_t start, std::size_t width) {
  Tensor out({a.rows(), width});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < width; ++j) out(i, j) = a(i, start + j);
  }
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
  Tensor out({rows.size(), a.cols()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = a.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void scatter_add_rows(Tensor& dst, const Tensor& src,
                      const std::vector<std::size_t>& rows) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto d = dst.row(rows[r]);
    const auto s = src.row(r);
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
  }
}

void check_head_shapes(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.cols() != k.cols() || q.rows() != k.rows() || v.rows() != k.rows()) {
    throw DimensionError("attention head: q " + shape_string(q.shape()) +
                         ", k " + shape_string(k.shape()) + ", v " +
                         shape_string(v.shape()) + " are inconsistent");
  }
}

// Shared mixture engine. Softmax tokens contribute exp(a_ij - c_i) v_j with
// a_ij = q_i k_j / sqrt(D); linear tokens contribute through the cached
// aggregates kv and ksum. With an empty T_S the stabilizer is 0.
Tensor mixture_forward(const Tensor& q, const Tensor& k, const Tensor& v,
                       const FeatureMap* phi_q, const FeatureMap* phi_k,
                       std::vector<std::size_t> softmax_tokens,
                       std::vector<std::size_t> linear_tokens,
                       Stabilizer mode, HeadTape& tape) {
  check_head_shapes(q, k, v);
  const std::size_t n = q.rows(), d = q.cols(), m = v.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  tape.softmax_tokens = std::move(softmax_tokens);
  tape.linear_tokens = std::move(linear_tokens);
  tape.has_linear = !tape.linear_tokens.empty();
  tape.scaled_linear = mode == Stabilizer::kConsistent;
  const auto& soft = tape.softmax_tokens;
  const auto& lin = tape.linear_tokens;

  Tensor num({n, m});
  std::vector<double> den(n, 0.0);
  std::vector<double> shift(n, 0.0);
  tape.argmax.assign(n, 0);

  if (!soft.empty()) {
    tape.exp_weights = Tensor({n, soft.size()});
    std::vector<double> logits(soft.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto qi = q.row(i);
      for (std::size_t s = 0; s < soft.size(); ++s) {
        const auto kj = k.row(soft[s]);
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += qi[c] * kj[c];
        logits[s] = dot * inv_sqrt_d;
      }
      const auto peak = std::max_element(logits.begin(), logits.end());
      tape.argmax[i] = static_cast<std::size_t>(peak - logits.begin());
      shift[i] = *peak;
      auto ni = num.row(i);
      for (std::size_t s = 0; s < soft.size(); ++s) {
        const double w = std::exp(logits[s] - shift[i]);
        tape.exp_weights(i, s) = w;
        den[i] += w;
        const auto vj = v.row(soft[s]);
        for (std::size_t c = 0; c < m; ++c) ni[c] += w * vj[c];
      }
    }
  } else {
    tape.exp_weights = Tensor();
  }

  tape.gain.assign(n, 1.0);
  if (tape.has_linear) {
    if (phi_q == nullptr || phi_k == nullptr) {
      throw ArgumentError("linear tokens present but no feature maps given");
    }
    tape.phi_q = apply_feature_map(*phi_q, q, tape.query_tape);
    tape.phi_k = apply_feature_map(*phi_k, gather_rows(k, lin), tape.key_tape);
    tape.kv = matmul_tn(tape.phi_k, gather_rows(v, lin));
    tape.ksum = column_sums(tape.phi_k);
    const std::size_t e = tape.phi_q.cols();
    for (std::size_t i = 0; i < n; ++i) {
      if (tape.scaled_linear) tape.gain[i] = std::exp(-shift[i]);
      const double g = tape.gain[i];
      const auto fq = tape.phi_q.row(i);
      auto ni = num.row(i);
      double lin_den = 0.0;
      for (std::size_t c = 0; c < e; ++c) {
        lin_den += fq[c] * tape.ksum[c];
        const auto kv_row = tape.kv.row(c);
        const double f = g * fq[c];
        for (std::size_t o = 0; o < m; ++o) ni[o] += f * kv_row[o];
      }
      den[i] += g * lin_den;
    }
  }

  tape.clamped.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (den[i] < kDenominatorGuard) {
      den[i] = kDenominatorGuard;
      tape.clamped[i] = 1;
    }
    auto ni = num.row(i);
    for (double& x : ni) x /= den[i];
  }
  tape.denominator = std::move(den);
  tape.out = std::move(num);
  require_finite(tape.out, "attention kernel");
  return tape.out;
}

struct HeadGrad {
  Tensor dq, dk, dv;
};

HeadGrad mixture_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                          const FeatureMap* phi_q, const FeatureMap* phi_k,
                          const HeadTape& tape, const Tensor& dout,
                          FeatureMap* grad_q, FeatureMap* grad_k) {
  const std::size_t n = q.rows(), d = q.cols(), m = v.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const auto& soft = tape.softmax_tokens;
  const auto& lin = tape.linear_tokens;
  HeadGrad g{Tensor({n, d}), Tensor({n, d}), Tensor({n, m})};

  // dL/dnum_i = dout_i / den_i, dL/dden_i = -dout_i . out_i / den_i.
  Tensor dnum({n, m});
  std::vector<double> dden(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto di = dout.row(i);
    const auto oi = tape.out.row(i);
    auto dn = dnum.row(i);
    double dot = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      dn[c] = di[c] / tape.denominator[i];
      dot += di[c] * oi[c];
    }
    if (!tape.clamped[i]) dden[i] = -dot / tape.denominator[i];
  }

  std::vector<double> dshift(n, 0.0);
  Tensor dlogit;
  if (!soft.empty()) {
    dlogit = Tensor({n, soft.size()});
    for (std::size_t i = 0; i < n; ++i) {
      const auto dn = dnum.row(i);
      for (std::size_t s = 0; s < soft.size(); ++s) {
        const auto vj = v.row(soft[s]);
        const double w = tape.exp_weights(i, s);
        double dw = dden[i];
        auto dvj = g.dv.row(soft[s]);
        for (std::size_t c = 0; c < m; ++c) {
          dw += dn[c] * vj[c];
          dvj[c] += w * dn[c];
        }
        dlogit(i, s) = dw * w;
        dshift[i] -= dw * w;
      }
    }
  }

  if (tape.has_linear) {
    const std::size_t e = tape.phi_q.cols();
    Tensor dphi_q({n, e});
    Tensor scaled_phi_q({n, e});
    Tensor dksum({1, e});
    for (std::size_t i = 0; i < n; ++i) {
      const double gain = tape.gain[i];
      const auto fq = tape.phi_q.row(i);
      const auto dn = dnum.row(i);
      double dgain = 0.0;
      auto dfq = dphi_q.row(i);
      for (std::size_t c = 0; c < e; ++c) {
        const auto kv_row = tape.kv.row(c);
        double lin_num_dot = 0.0;
        for (std::size_t o = 0; o < m; ++o) lin_num_dot += kv_row[o] * dn[o];
        const double local = lin_num_dot + tape.ksum[c] * dden[i];
        dgain += fq[c] * local;
        dfq[c] = gain * local;
        scaled_phi_q(i, c) = gain * fq[c];
        dksum[c] += gain * dden[i] * fq[c];
      }
      if (tape.scaled_linear) dshift[i] -= dgain * gain;
    }
    const Tensor dkv = matmul_tn(scaled_phi_q, dnum);  // E x M
    const Tensor v_lin = gather_rows(v, lin);
    Tensor dphi_k = matmul_nt(v_lin, dkv);  // |T_L| x E
    add_row_inplace(dphi_k, dksum);
    scatter_add_rows(g.dv, matmul(tape.phi_k, dkv), lin);

    FeatureMap scratch_q = grad_q ? FeatureMap{} : zeros_like(*phi_q);
    FeatureMap scratch_k = grad_k ? FeatureMap{} : zeros_like(*phi_k);
    add_inplace(g.dq, feature_map_backward(*phi_q, tape.query_tape, dphi_q,
                                           grad_q ? *grad_q : scratch_q));
    scatter_add_rows(g.dk,
                     feature_map_backward(*phi_k, tape.key_tape, dphi_k,
                                          grad_k ? *grad_k : scratch_k),
                     lin);
  }

  if (!soft.empty()) {
    // c_i = a_{i, argmax_i}; its gradient flows into that logit.
    for (std::size_t i = 0; i < n; ++i) dlogit(i, tape.argmax[i]) += dshift[i];
    for (std::size_t i = 0; i < n; ++i) {
      const auto qi = q.row(i);
      auto dqi = g.dq.row(i);
      for (std::size_t s = 0; s < soft.size(); ++s) {
        const double da = dlogit(i, s) * inv_sqrt_d;
        if (da == 0.0) continue;
        const auto kj = k.row(soft[s]);
        auto dkj = g.dk.row(soft[s]);
        for (std::size_t c = 0; c < d; ++c) {
          dqi[c] += da * kj[c];
          dkj[c] += da * qi[c];
        }
      }
    }
  }
  return g;
}

std::vector<std::size_t> all_tokens(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

void check_phi(const Projections& p, const FeatureMapPair& phi) {
  if (phi.query.size() != p.heads() || phi.key.size() != p.heads()) {
    throw DimensionError("feature map pair has " +
                         std::to_string(phi.query.size()) + "/" +
                         std::to_string(phi.key.size()) + " heads, expected " +
                         std::to_string(p.heads()));
  }
}

}  // namespace

Projections project_qkv(const Tensor& x, const AttentionWeights& w) {
  validate(w);
  if (x.cols() != w.model_dim()) {
    throw DimensionError("project_qkv: input width " +
                         std::to_string(x.cols()) + " != model width " +
                         std::to_string(w.model_dim()));
  }
  const Tensor q = matmul(x, w.w_q);
  const Tensor k = matmul(x, w.w_k);
  const Tensor v = matmul(x, w.w_v);
  Projections p;
  for (std::size_t h = 0; h < w.heads; ++h) {
    p.q.push_back(column_block(q, h * w.qk_dim, w.qk_dim));
    p.k.push_back(column_block(k, h * w.qk_dim, w.qk_dim));
    p.v.push_back(column_block(v, h * w.v_dim, w.v_dim));
  }
  return p;
}

Tensor project_qkv_backward(const Tensor& x, const AttentionWeights& w,
                            const Projections& dproj, AttentionWeights& grad) {
  const Tensor dq = concat_heads(dproj.q);
  const Tensor dk = concat_heads(dproj.k);
  const Tensor dv = concat_heads(dproj.v);
  add_inplace(grad.w_q, matmul_tn(x, dq));
  add_inplace(grad.w_k, matmul_tn(x, dk));
  add_inplace(grad.w_v, matmul_tn(x, dv));
  Tensor dx = matmul_nt(dq, w.w_q);
  add_inplace(dx, matmul_nt(dk, w.w_k));
  add_inplace(dx, matmul_nt(dv, w.w_v));
  return dx;
}

Tensor concat_heads(const std::vector<Tensor>& heads) {
  if (heads.empty()) throw DimensionError("concat_heads: no heads");
  const std::size_t n = heads.front().rows();
  std::size_t width = 0;
  for (const auto& h : heads) {
    if (h.rows() != n) throw DimensionError("concat_heads: row mismatch");
    width += h.cols();
  }
  Tensor out({n, width});
  std::size_t offset = 0;
  for (const auto& h : heads) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = h.row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + offset);
    }
    offset += h.cols();
  }
  return out;
}

std::vector<Tensor> split_heads(const Tensor& joined, std::size_t heads) {
  if (heads == 0 || joined.cols() % heads != 0) {
    throw DimensionError("split_heads: width " + std::to_string(joined.cols()) +
                         " not divisible by " + std::to_string(heads));
  }
  const std::size_t width = joined.cols() / heads;
  std::vector<Tensor> out;
  for (std::size_t h = 0; h < heads; ++h) {
    out.push_back(column_block(joined, h * width, width));
  }
  return out;
}

Tensor softmax_head(const Tensor& q, const Tensor& k, const Tensor& v) {
  check_head_shapes(q, k, v);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor y = matmul(row_softmax_stabilized(scale(matmul_nt(q, k), inv_sqrt_d)),
                    v);
  require_finite(y, "softmax_head");
  return y;
}

Tensor linear_head(const Tensor& q, const Tensor& k, const Tensor& v,
                   const FeatureMap& phi_q, const FeatureMap& phi_k) {
  HeadTape tape;
  return mixture_forward(q, k, v, &phi_q, &phi_k, {}, all_tokens(q.rows()),
                         Stabilizer::kLiteral, tape);
}

Tensor hybrid_head(const Tensor& q, const Tensor& k, const Tensor& v,
                   const FeatureMap& phi_q, const FeatureMap& phi_k,
                   const TokenPartition& part, Stabilizer mode) {
  if (part.n_tokens() != q.rows()) {
    throw DimensionError("hybrid_head: partition covers " +
                         std::to_string(part.n_tokens()) + " tokens, input has " +
                         std::to_string(q.rows()));
  }
  HeadTape tape;
  return mixture_forward(q, k, v, &phi_q, &phi_k, part.softmax_indices(),
                         part.linear_indices(), mode, tape);
}

Tensor softmax_attention(const Projections& p) {
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    heads.push_back(softmax_head(p.q[h], p.k[h], p.v[h]));
  }
  return concat_heads(heads);
}

Tensor linear_attention(const Projections& p, const FeatureMapPair& phi) {
  check_phi(p, phi);
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    heads.push_back(
        linear_head(p.q[h], p.k[h], p.v[h], phi.query[h], phi.key[h]));
  }
  return concat_heads(heads);
}

Tensor hybrid_attention(const Projections& p, const FeatureMapPair& phi,
                        const TokenPartition& part, Stabilizer mode) {
  check_phi(p, phi);
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    heads.push_back(hybrid_head(p.q[h], p.k[h], p.v[h], phi.query[h],
                                phi.key[h], part, mode));
  }
  return concat_heads(heads);
}

Tensor attention_forward(const Projections& p, const FeatureMapPair* phi,
                         const KernelConfig& kernel, AttentionTape& tape) {
  const std::size_t n = p.tokens();
  std::vector<std::size_t> soft, lin;
  switch (kernel.kind) {
    case AttentionKind::kSoftmax:
      soft = all_tokens(n);
      break;
    case AttentionKind::kLinear:
      lin = all_tokens(n);
      break;
    case AttentionKind::kHybrid: {
      const TokenPartition part = partition_tokens(n, kernel.rate);
      soft = part.softmax_indices();
      lin = part.linear_indices();
      break;
    }
  }
  if (!lin.empty()) {
    if (phi == nullptr) {
      throw ArgumentError("attention_forward: kernel needs feature maps");
    }
    check_phi(p, *phi);
  }
  tape.heads.assign(p.heads(), HeadTape{});
  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    outs.push_back(mixture_forward(
        p.q[h], p.k[h], p.v[h], phi ? &phi->query[h] : nullptr,
        phi ? &phi->key[h] : nullptr, soft, lin, kernel.stabilizer,
        tape.heads[h]));
  }
  return concat_heads(outs);
}

AttentionGrads attention_backward(const Projections& p,
                                  const FeatureMapPair* phi,
                                  const AttentionTape& tape,
                                  const Tensor& dout) {
  const std::vector<Tensor> douts = split_heads(dout, p.heads());
  AttentionGrads grads;
  if (phi) grads.phi = zeros_like(*phi);
  for (std::size_t h = 0; h < p.heads(); ++h) {
    HeadGrad g = mixture_backward(
        p.q[h], p.k[h], p.v[h], phi ? &phi->query[h] : nullptr,
        phi ? &phi->key[h] : nullptr, tape.heads[h], douts[h],
        grads.phi ? &grads.phi->query[h] : nullptr,
        grads.phi ? &grads.phi->key[h] : nullptr);
    grads.proj.q.push_back(std::move(g.dq));
    grads.proj.k.push_back(std::move(g.dk));
    grads.proj.v.push_back(std::move(g.dv));
  }
  return grads;
}

}  // namespace hybridize
