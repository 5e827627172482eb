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

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "hybridize/distill.h"
#include "hybridize/errors.h"
#include "hybridize/numerics.h"
#include "hybridize/params.h"
#include "hybridize/toymodel.h"
#include "oracle_values.h"
#include "test_support.h"

namespace hybridize {
namespace {

using testing::dot;
using testing::grad_rel_error;
using testing::random_projections;
using testing::random_tensor;

ModelDims small_model() {
  ModelDims d;
  d.blocks = 2;
  d.tokens = 16;
  d.width = 8;
  d.heads = 2;
  d.qk_dim = 4;
  d.v_dim = 4;
  d.mlp_hidden = 16;
  d.timesteps = 3;
  return d;
}

FeatureMapSpec spec_for(std::size_t d) {
  FeatureMapSpec s;
  s.input_dim = d;
  return s;
}

TEST(TrajectoryCache, DeterministicAndCounted) {
  const ToyModel teacher = make_teacher(small_model(), 1);
  const std::vector<std::uint64_t> seeds{5, 9, 11};
  const std::vector<int> steps{1, 2, 3};
  const TrajectoryCache a = cache_teacher_trajectory(teacher, seeds, steps);
  const TrajectoryCache b = cache_teacher_trajectory(teacher, seeds, steps);
  ASSERT_EQ(a.entries.size(), 9u);
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].seed, b.entries[i].seed);
    EXPECT_EQ(a.entries[i].timestep, b.entries[i].timestep);
    EXPECT_EQ(a.entries[i].block_inputs, b.entries[i].block_inputs);
    EXPECT_EQ(a.entries[i].attention_outputs, b.entries[i].attention_outputs);
  }
}

TEST(TrajectoryCache, CachedOutputsReproduceUnderIndependentForward) {
  const ToyModel teacher = make_teacher(small_model(), 2);
  const std::vector<std::uint64_t> seeds{3};
  const std::vector<int> steps{1, 3};
  const TrajectoryCache cache = cache_teacher_trajectory(teacher, seeds, steps);
  for (const auto& e : cache.entries) {
    ASSERT_EQ(e.block_inputs.size(), 2u);
    for (std::size_t l = 0; l < 2; ++l) {
      const Projections p = project_qkv(e.block_inputs[l], teacher.blocks[l].attention);
      std::vector<Tensor> heads;
      for (std::size_t h = 0; h < p.heads(); ++h)
        heads.push_back(testing::softmax_oracle(p.q[h], p.k[h], p.v[h]).out);
      EXPECT_LE(max_abs_diff(concat_heads(heads), e.attention_outputs[l]), 1e-12);
    }
    // Block l + 1 consumes block l's output.
    EXPECT_LE(max_abs_diff(block_forward(teacher.blocks[0], e.block_inputs[0]),
                           e.block_inputs[1]),
              1e-12);
  }
}

TEST(ValueLoss, ZeroForIdenticalAndOneForUnitOffset) {
  SeededRng rng(1);
  const Tensor y = random_tensor(rng, {4, 3});
  EXPECT_EQ(loss_value_distill(y, y), 0.0);
  Tensor shifted = y;
  for (double& x : shifted.data()) x += 1.0;
  EXPECT_NEAR(loss_value_distill(y, shifted), 1.0, 1e-15);
}

TEST(ValueLoss, FixedCaseAndLoopOracle) {
  const Tensor a({2, 3}, {oracle::kLvdA.begin(), oracle::kLvdA.end()});
  const Tensor b({2, 3}, {oracle::kLvdB.begin(), oracle::kLvdB.end()});
  EXPECT_DOUBLE_EQ(loss_value_distill(a, b), oracle::kLvd[0]);
  SeededRng rng(2);
  const Tensor x = random_tensor(rng, {5, 7}), z = random_tensor(rng, {5, 7});
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - z[i]);
  EXPECT_NEAR(loss_value_distill(x, z), s / 35.0, 1e-15);
}

TEST(ValueLoss, ShapeMismatchThrows) {
  EXPECT_THROW(loss_value_distill(Tensor({2, 3}), Tensor({3, 2})), DimensionError);
}

TEST(AttentionLoss, ExactKernelGivesZero) {
  // One-dimensional features phi_q = exp(a_i .), phi_k = exp(. b_j) reproduce
  // exp(q_i k_j / sqrt(D)) when q and k are rank-one.
  const std::vector<Tensor> q{Tensor::matrix(3, 1, {0.5, -1.0, 2.0})};
  const std::vector<Tensor> k{Tensor::matrix(3, 1, {1.0, 1.0, 1.0})};
  const std::vector<Tensor> fq{Tensor::matrix(3, 1, {std::exp(0.5), std::exp(-1.0), std::exp(2.0)})};
  const std::vector<Tensor> fk{Tensor::matrix(3, 1, {1.0, 1.0, 1.0})};
  EXPECT_NEAR(loss_attention_distill(q, k, fq, fk), 0.0, 1e-15);
}

TEST(AttentionLoss, SinglePairLogTwo) {
  const std::vector<Tensor> q{Tensor::matrix(1, 2, {0.0, 0.0})};
  const std::vector<Tensor> k{Tensor::matrix(1, 2, {0.3, -0.2})};
  const std::vector<Tensor> f{Tensor::matrix(1, 2, {0.0, 0.0})};
  EXPECT_NEAR(loss_attention_distill(q, k, f, f), std::log(2.0), 1e-15);
}

std::vector<Tensor> heads_of(const double* data, std::size_t heads, std::size_t n,
                             std::size_t w) {
  std::vector<Tensor> out;
  for (std::size_t h = 0; h < heads; ++h)
    out.emplace_back(Shape{n, w}, std::vector<double>(data + h * n * w, data + (h + 1) * n * w));
  return out;
}

TEST(AttentionLoss, FixedCaseMatchesReference) {
  const auto q = heads_of(oracle::kLadQ.data(), 2, 3, 2);
  const auto k = heads_of(oracle::kLadK.data(), 2, 3, 2);
  const auto fq = heads_of(oracle::kLadPhiQ.data(), 2, 3, 4);
  const auto fk = heads_of(oracle::kLadPhiK.data(), 2, 3, 4);
  EXPECT_NEAR(loss_attention_distill(q, k, fq, fk), oracle::kLad[0], 1e-15);
}

double pairwise_ad(const std::vector<Tensor>& q, const std::vector<Tensor>& k,
                   const std::vector<Tensor>& fq, const std::vector<Tensor>& fk) {
  double s = 0;
  std::size_t count = 0;
  for (std::size_t h = 0; h < q.size(); ++h)
    for (std::size_t i = 0; i < q[h].rows(); ++i)
      for (std::size_t j = 0; j < k[h].rows(); ++j) {
        double a = dot(q[h].row(i), k[h].row(j)) / std::sqrt(double(q[h].cols()));
        a = std::clamp(a, -30.0, 30.0);
        const double r = std::exp(a) - dot(fq[h].row(i), fk[h].row(j));
        s += r * r;
        ++count;
      }
  return std::log1p(s / static_cast<double>(count));
}

TEST(AttentionLoss, RandomMatchesPairwiseLoopAndClamps) {
  SeededRng rng(3);
  for (double sigma : {0.7, 12.0}) {
    std::vector<Tensor> q, k, fq, fk;
    for (int h = 0; h < 2; ++h) {
      q.push_back(random_tensor(rng, {4, 3}, sigma));
      k.push_back(random_tensor(rng, {4, 3}, sigma));
      fq.push_back(random_tensor(rng, {4, 5}));
      fk.push_back(random_tensor(rng, {4, 5}));
    }
    const double got = loss_attention_distill(q, k, fq, fk);
    EXPECT_TRUE(std::isfinite(got));
    EXPECT_NEAR(got, pairwise_ad(q, k, fq, fk), 1e-12 * std::max(1.0, got));
  }
}

TEST(AttentionLoss, FeatureMapOverloadAgrees) {
  SeededRng rng(4);
  const FeatureMapPair phi = make_feature_map_pair(spec_for(3), 2, rng);
  const Projections p = random_projections(rng, 2, 5, 3, 2);
  std::vector<Tensor> fq, fk;
  for (std::size_t h = 0; h < 2; ++h) {
    fq.push_back(apply_feature_map(phi.query[h], p.q[h]));
    fk.push_back(apply_feature_map(phi.key[h], p.k[h]));
  }
  EXPECT_DOUBLE_EQ(loss_attention_distill(p, phi), loss_attention_distill(p.q, p.k, fq, fk));
}

// Both losses' analytic feature-map gradients against central differences.
void check_distill_gradients(std::uint64_t seed, std::size_t n, std::size_t d, int degree,
                             const KernelConfig& kernel) {
  SeededRng rng(seed);
  FeatureMapSpec spec = spec_for(d);
  spec.degree = degree;
  const FeatureMapPair phi = make_feature_map_pair(spec, 2, rng);
  const Projections p = random_projections(rng, 2, n, d, 2);
  const Tensor target = random_tensor(rng, {n, 4});
  const Tensor flat({param_count(phi)}, flatten_params(phi));

  FeatureMapPair g_vd = zeros_like(phi);
  value_distill_gradient(p, target, phi, kernel, 1.0, g_vd);
  const auto f_vd = [&](std::span<const double> theta) {
    FeatureMapPair pp = phi;
    assign_params(pp, theta);
    AttentionTape t;
    return loss_value_distill(target, attention_forward(p, &pp, kernel, t));
  };
  EXPECT_LE(grad_rel_error(Tensor({flat.size()}, flatten_params(g_vd)),
                           finite_diff_grad(f_vd, flat, 1e-6)),
            1e-4);

  FeatureMapPair g_ad = zeros_like(phi);
  attention_distill_gradient(p, phi, 1.0, g_ad);
  const auto f_ad = [&](std::span<const double> theta) {
    FeatureMapPair pp = phi;
    assign_params(pp, theta);
    return loss_attention_distill(p, pp);
  };
  EXPECT_LE(grad_rel_error(Tensor({flat.size()}, flatten_params(g_ad)),
                           finite_diff_grad(f_ad, flat, 1e-6)),
            1e-4);
}

TEST(DistillGradients, MatchFiniteDifferences) {
  check_distill_gradients(10, 6, 3, 2, KernelConfig::hybrid(2));
  check_distill_gradients(11, 8, 4, 3, KernelConfig::hybrid(4, Stabilizer::kConsistent));
  check_distill_gradients(12, 2, 2, 1, KernelConfig::hybrid(2));
}

TEST(DistillGradients, WeightScalesAccumulation) {
  SeededRng rng(13);
  const FeatureMapPair phi = make_feature_map_pair(spec_for(2), 1, rng);
  const Projections p = random_projections(rng, 1, 4, 2, 2);
  const Tensor target = random_tensor(rng, {4, 2});
  FeatureMapPair once = zeros_like(phi), twice = zeros_like(phi);
  const double l1 = value_distill_gradient(p, target, phi, KernelConfig::hybrid(2), 0.5, once);
  value_distill_gradient(p, target, phi, KernelConfig::hybrid(2), 0.25, twice);
  const double l2 = value_distill_gradient(p, target, phi, KernelConfig::hybrid(2), 0.25, twice);
  EXPECT_EQ(l1, l2);
  const auto a = flatten_params(once), b = flatten_params(twice);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

// Frozen random softmax "teacher" acting on random token sets.
BlockDataset random_block_dataset(std::uint64_t seed, std::size_t n, std::size_t d,
                                  std::size_t train, std::size_t heldout) {
  SeededRng rng(seed);
  AttentionWeights w;
  w.heads = 2;
  w.qk_dim = d;
  w.v_dim = d;
  const std::size_t f = 8;
  w.w_q = random_tensor(rng, {f, 2 * d}, 1.0 / std::sqrt(double(f)));
  w.w_k = random_tensor(rng, {f, 2 * d}, 1.0 / std::sqrt(double(f)));
  w.w_v = random_tensor(rng, {f, 2 * d}, 1.0 / std::sqrt(double(f)));
  w.w_o = random_tensor(rng, {2 * d, f});
  BlockDataset data;
  for (std::size_t s = 0; s < train + heldout; ++s) {
    DistillSample sample;
    sample.proj = project_qkv(random_tensor(rng, {n, f}), w);
    sample.target = softmax_attention(sample.proj);
    (s < train ? data.train : data.heldout).push_back(std::move(sample));
  }
  return data;
}

TEST(DistillBlock, RateOneHasNothingToLearn) {
  const BlockDataset data = random_block_dataset(1, 8, 2, 4, 2);
  SeededRng rng(2);
  const FeatureMapPair init = make_feature_map_pair(spec_for(2), 2, rng);
  const DistillResult r = distill_block(data, init, 1, DistillConfig{});
  EXPECT_EQ(r.initial_error, 0.0);
  EXPECT_EQ(r.final_error, 0.0);
  EXPECT_EQ(r.updates, 0u);
  EXPECT_EQ(flatten_params(r.phi), flatten_params(init));
}

TEST(DistillBlock, TwoHundredUpdatesReduceHeldOutError) {
  const BlockDataset data = random_block_dataset(0, 32, 4, 16, 4);
  SeededRng rng(0);
  const FeatureMapPair init = make_feature_map_pair(spec_for(4), 2, rng);
  DistillConfig cfg;
  cfg.max_rounds = 50;
  cfg.tolerance = 0.0;
  cfg.seed = 0;
  const DistillResult a = distill_block(data, init, 2, cfg);
  EXPECT_EQ(a.updates, 200u);
  EXPECT_EQ(a.heldout_errors.size(), 50u);
  EXPECT_LT(a.final_error, a.initial_error);
  EXPECT_DOUBLE_EQ(a.initial_error,
                   heldout_error(data.heldout, init, 2, Stabilizer::kLiteral));

  const DistillResult b = distill_block(data, init, 2, cfg);
  EXPECT_EQ(a.train_losses, b.train_losses);
  EXPECT_EQ(a.heldout_errors, b.heldout_errors);
  EXPECT_EQ(flatten_params(a.phi), flatten_params(b.phi));
}

double mean_attention_loss(const BlockDataset& data, const FeatureMapPair& phi) {
  double s = 0;
  for (const auto& sample : data.train) s += loss_attention_distill(sample.proj, phi);
  return s / static_cast<double>(data.train.size());
}

TEST(DistillBlock, AttentionLossAlsoTrains) {
  const BlockDataset data = random_block_dataset(4, 16, 2, 8, 2);
  SeededRng rng(4);
  const FeatureMapPair init = make_feature_map_pair(spec_for(2), 2, rng);
  DistillConfig cfg;
  cfg.loss = LossKind::kAttention;
  cfg.max_rounds = 50;
  cfg.tolerance = 0.0;
  const DistillResult r = distill_block(data, init, 2, cfg);
  ASSERT_EQ(r.train_losses.size(), 200u);
  // Minibatch losses are noisy; compare the full training objective.
  EXPECT_LT(mean_attention_loss(data, r.phi), mean_attention_loss(data, init));
}

TEST(DistillBlock, ToleranceStopsEarly) {
  const BlockDataset data = random_block_dataset(5, 16, 2, 8, 2);
  SeededRng rng(5);
  DistillConfig cfg;
  cfg.max_rounds = 200;
  cfg.tolerance = 0.5;  // any round improving less than half stops the loop
  const DistillResult r = distill_block(data, make_feature_map_pair(spec_for(2), 2, rng), 2, cfg);
  EXPECT_LT(r.heldout_errors.size(), 200u);
  EXPECT_EQ(r.updates, r.heldout_errors.size() * cfg.update_repeats);
}

TEST(DistillBlock, DivergenceThresholdAborts) {
  const BlockDataset data = random_block_dataset(6, 8, 2, 4, 2);
  SeededRng rng(6);
  DistillConfig cfg;
  cfg.divergence_threshold = 1e-9;
  EXPECT_THROW(distill_block(data, make_feature_map_pair(spec_for(2), 2, rng), 2, cfg),
               DivergenceError);
}

TEST(DistillBlock, RejectsBadConfig) {
  const BlockDataset data = random_block_dataset(7, 8, 2, 4, 2);
  SeededRng rng(7);
  const FeatureMapPair init = make_feature_map_pair(spec_for(2), 2, rng);
  DistillConfig cfg;
  cfg.batch = 0;
  EXPECT_THROW(distill_block(data, init, 2, cfg), ArgumentError);
  EXPECT_THROW(distill_block(BlockDataset{}, init, 2, DistillConfig{}), ArgumentError);
}

struct TableFixture {
  ToyModel teacher = make_teacher(small_model(), 3);
  TrajectoryCache train;
  TrajectoryCache heldout;
  std::vector<int> rates{1, 2, 4};

  TableFixture() {
    const std::vector<std::uint64_t> ts{1, 2, 3}, hs{100};
    const std::vector<int> steps{1, 2, 3};
    train = cache_teacher_trajectory(teacher, ts, steps);
    heldout = cache_teacher_trajectory(teacher, hs, steps);
  }
};

DistillConfig quick_config() {
  DistillConfig c;
  c.max_rounds = 5;
  c.tolerance = 0.0;
  c.seed = 17;
  return c;
}

TEST(ErrorTable, ShapeZeroColumnAndDeterminism) {
  TableFixture fx;
  const ToyModel teacher_before = fx.teacher;
  const ErrorTableBuild a = build_error_table(fx.teacher, fx.train, fx.heldout, fx.rates,
                                              spec_for(4), quick_config(), 1);
  ASSERT_EQ(a.table.blocks(), 2u);
  EXPECT_EQ(a.table.rates, fx.rates);
  for (const auto& row : a.table.e) {
    ASSERT_EQ(row.size(), 3u);
    EXPECT_EQ(row[0], 0.0);
    for (double e : row) {
      EXPECT_GE(e, 0.0);
      EXPECT_TRUE(std::isfinite(e));
    }
  }
  EXPECT_TRUE(a.failures.empty());
  EXPECT_EQ(a.checkpoints.size(), 4u);  // 2 blocks x rates {2, 4}
  EXPECT_EQ(a.table.sample_count, fx.heldout.entries.size());
  EXPECT_EQ(flatten_params(fx.teacher), flatten_params(teacher_before));

  const ErrorTableBuild b = build_error_table(fx.teacher, fx.train, fx.heldout, fx.rates,
                                              spec_for(4), quick_config(), 3);
  EXPECT_EQ(a.table.e, b.table.e);
  for (const auto& [key, phi] : a.checkpoints) {
    EXPECT_EQ(flatten_params(phi), flatten_params(b.checkpoints.at(key)));
  }
}

TEST(ErrorTable, DivergedJobsBecomeInfinity) {
  TableFixture fx;
  DistillConfig cfg = quick_config();
  cfg.divergence_threshold = 1e-12;
  const ErrorTableBuild r = build_error_table(fx.teacher, fx.train, fx.heldout, fx.rates,
                                              spec_for(4), cfg, 2);
  for (const auto& row : r.table.e) {
    EXPECT_EQ(row[0], 0.0);
    EXPECT_TRUE(std::isinf(row[1]));
    EXPECT_TRUE(std::isinf(row[2]));
  }
  EXPECT_EQ(r.failures.size(), 4u);
  EXPECT_TRUE(r.checkpoints.empty());
}

TEST(ErrorTable, BlockSeedsDiffer) {
  EXPECT_NE(block_seed(0, 0), block_seed(0, 1));
  EXPECT_NE(block_seed(0, 0), block_seed(1, 0));
  EXPECT_EQ(block_seed(4, 2), block_seed(4, 2));
}

}  // namespace
}  // namespace hybridize
