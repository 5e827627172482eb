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

#ifndef HYBRIDIZE_DISTILL_H_
#define HYBRIDIZE_DISTILL_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hybridize/attention.h"
#include "hybridize/feature_map.h"
#include "hybridize/optim.h"
#include "hybridize/tables.h"
#include "hybridize/toymodel.h"

namespace hybridize {

// Teacher activations for every (seed, timestep): each block's input and its
// raw attention output.
struct TrajectoryEntry {
  std::uint64_t seed = 0;
  int timestep = 0;
  std::vector<Tensor> block_inputs;
  std::vector<Tensor> attention_outputs;
};

struct TrajectoryCache {
  std::vector<TrajectoryEntry> entries;
};

// For each seed: render a clean sample and a noise draw from SeededRng(seed),
// then run the teacher at every t in `timesteps` on the noised input.
TrajectoryCache cache_teacher_trajectory(const ToyModel& teacher,
                                         std::span<const std::uint64_t> seeds,
                                         std::span<const int> timesteps);

// Mean absolute difference over all elements.
double loss_value_distill(const Tensor& target, const Tensor& predicted);

// Exponent clamp applied inside the attention-distillation loss.
inline constexpr double kLogitClamp = 30.0;

// log(1 + mean over heads and (i, j) of (exp(a_ij) - phi_q(q_i) phi_k(k_j))^2)
// with a_ij = clamp(q_i k_j / sqrt(D), -30, 30). The feature rows are given
// directly, one N x E tensor per head.
double loss_attention_distill(std::span<const Tensor> q,
                              std::span<const Tensor> k,
                              std::span<const Tensor> phi_q_rows,
                              std::span<const Tensor> phi_k_rows);
double loss_attention_distill(const Projections& p,
                              const FeatureMapPair& phi);

enum class LossKind { kValue, kAttention };

// Loss of one distillation sample plus weight * gradient w.r.t. the feature
// maps, added into `grad`.
double value_distill_gradient(const Projections& p, const Tensor& target,
                              const FeatureMapPair& phi,
                              const KernelConfig& kernel, double weight,
                              FeatureMapPair& grad);
double attention_distill_gradient(const Projections& p,
                                  const FeatureMapPair& phi, double weight,
                                  FeatureMapPair& grad);

struct DistillConfig {
  std::size_t batch = 4;           // m
  std::size_t update_repeats = 4;  // U
  double learning_rate = 1e-3;
  LossKind loss = LossKind::kValue;
  std::size_t max_rounds = 50;
  // Stop once a round improves held-out error by less than this fraction.
  // Zero or negative runs all max_rounds.
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  Stabilizer stabilizer = Stabilizer::kLiteral;
  double divergence_threshold = 1e6;
};

// Frozen q/k/v of one block plus the teacher attention output it must match.
struct DistillSample {
  Projections proj;
  Tensor target;
};

struct BlockDataset {
  std::vector<DistillSample> train;
  std::vector<DistillSample> heldout;
};

BlockDataset make_block_dataset(const AttentionWeights& weights,
                                const TrajectoryCache& train,
                                const TrajectoryCache& heldout,
                                std::size_t block);

// Mean L_vd of the hybrid student over `samples`.
double heldout_error(std::span<const DistillSample> samples,
                     const FeatureMapPair& phi, int rate, Stabilizer mode);

struct DistillResult {
  FeatureMapPair phi;
  double initial_error = 0.0;
  double final_error = 0.0;
  std::vector<double> train_losses;    // one per update
  std::vector<double> heldout_errors;  // one per round
  std::size_t updates = 0;
};

// Trains only the feature maps of one block: each round draws `batch`
// cached samples, then takes `update_repeats` AdamW steps on them. Rates
// without linear tokens (R = 1) have nothing to learn and report zero error.
// Throws DivergenceError when the loss exceeds the threshold.
DistillResult distill_block(const BlockDataset& data, FeatureMapPair init,
                            int rate, const DistillConfig& config);

using PhiCheckpoints = std::map<std::pair<std::size_t, int>, FeatureMapPair>;

struct ErrorTableBuild {
  ErrorTable table;
  PhiCheckpoints checkpoints;        // every (block, rate > 1) that converged
  std::vector<std::string> failures;  // diagnostics for +inf entries
};

// Seed of the feature-map initialization and batch order for one block. The
// same stream is used for every rate so rates are compared on equal footing.
std::uint64_t block_seed(std::uint64_t seed, std::size_t block);

// Runs distill_block for every (block, rate) on up to `jobs` threads.
// Diverged jobs become +inf entries; the run continues.
ErrorTableBuild build_error_table(const ToyModel& teacher,
                                  const TrajectoryCache& train,
                                  const TrajectoryCache& heldout,
                                  std::span<const int> rates,
                                  const FeatureMapSpec& phi_spec,
                                  const DistillConfig& config,
                                  std::size_t jobs = 1);

}  // namespace hybridize

#endif  // HYBRIDIZE_DISTILL_H_
