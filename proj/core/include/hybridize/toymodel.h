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

#ifndef HYBRIDIZE_TOYMODEL_H_
#define HYBRIDIZE_TOYMODEL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "hybridize/block.h"
#include "hybridize/optim.h"
#include "hybridize/rng.h"

namespace hybridize {

struct ModelDims {
  std::size_t blocks = 4;
  std::size_t tokens = 64;  // must be a perfect square (token grid)
  std::size_t width = 32;   // F
  std::size_t heads = 2;
  std::size_t qk_dim = 8;
  std::size_t v_dim = 8;
  std::size_t mlp_hidden = 64;
  int timesteps = 4;  // |T|; noise levels are 1..timesteps

  BlockDims block_dims() const {
    return {width, heads, qk_dim, v_dim, mlp_hidden};
  }
};

// Desk-scale denoiser: linear token embedding plus a per-timestep embedding,
// a stack of transformer blocks, and a linear readout predicting the noise.
struct ToyModel {
  ModelDims dims;
  DenseLayer embed_in;
  Tensor time_embedding;  // (timesteps + 1) x F, row t for noise level t
  std::vector<BlockParams> blocks;
  DenseLayer embed_out;
};

template <SameOrConst<ToyModel> M, class Fn>
void visit_tensors(M& model, Fn&& fn) {
  visit_tensors(model.embed_in, fn);
  fn(model.time_embedding);
  for (auto& block : model.blocks) visit_tensors(block, fn);
  visit_tensors(model.embed_out, fn);
}

void validate(const ToyModel& model);

// All-softmax model with N(0, 1/fan_in) weights; used directly as the
// "frozen-random" teacher or as the starting point for train_teacher.
ToyModel make_teacher(const ModelDims& dims, std::uint64_t seed);

// abar(t) = 1 - 0.98 t / timesteps, linear in t; abar(0) = 1.
double alpha_bar(int t, int timesteps);
// sqrt(abar) x0 + sqrt(1 - abar) eps.
Tensor noise_input(const Tensor& clean, const Tensor& noise, int t,
                   int timesteps);
std::vector<int> default_timesteps(int timesteps);

// Two Gaussian blobs translating across a sqrt(N) x sqrt(N) torus, rendered
// over four frames; each token's frame intensities are lifted to width F by
// a fixed embedding. Throws ArgumentError if N is not a perfect square.
Tensor render_clean(SeededRng& rng, const ModelDims& dims);

struct SyntheticSample {
  Tensor clean;
  int timestep = 1;
  Tensor noised;
  Tensor noise;  // regression target of the denoising loss
};

// Each sample: render_clean, t uniform in 1..timesteps, eps ~ N(0, I).
std::vector<SyntheticSample> generate_synthetic(SeededRng& rng,
                                                std::size_t count,
                                                const ModelDims& dims);

// Predicted noise, N x F.
Tensor denoise(const ToyModel& model, const Tensor& noised, int t);

// Per-block inputs and raw attention outputs from one forward pass.
struct ModelTrace {
  std::vector<Tensor> block_inputs;
  std::vector<Tensor> attention_outputs;
  Tensor output;
};
ModelTrace trace_forward(const ToyModel& model, const Tensor& noised, int t);

// Mean over samples of the mean-squared noise-prediction error.
double denoising_loss(const ToyModel& model,
                      std::span<const SyntheticSample> samples);

// Adds weight * d(loss)/d(params) into `grad` for one sample and returns the
// sample loss.
double accumulate_denoising_gradient(const ToyModel& model,
                                     const SyntheticSample& sample,
                                     double weight, ToyModel& grad);

struct TrainConfig {
  std::size_t iters = 500;
  double learning_rate = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  double divergence_threshold = 1e6;
};

// AdamW on the denoising objective over every parameter of `model`.
// Minibatches are drawn with replacement from `data` using `config.seed`.
// Throws DivergenceError if the batch loss turns non-finite or exceeds the
// threshold.
ToyModel train_model(ToyModel model, std::span<const SyntheticSample> data,
                     const TrainConfig& config);

// train_model restricted to all-softmax models.
ToyModel train_teacher(ToyModel model, std::span<const SyntheticSample> data,
                       const TrainConfig& config);

}  // namespace hybridize

#endif  // HYBRIDIZE_TOYMODEL_H_
