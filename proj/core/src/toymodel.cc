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

#include "hybridize/toymodel.h"

#include <cmath>
#include <numbers>

#include "hybridize/errors.h"
#include "hybridize/numerics.h"

namespace hybridize {
namespace {

constexpr std::size_t kFrames = 4;
constexpr std::size_t kBlobs = 2;
// Seed of the fixed frame-to-feature embedding shared by every sample.
constexpr std::uint64_t kEmbeddingSeed = 0x5EEDF00DULL;

std::size_t grid_side(std::size_t tokens) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(
      static_cast<double>(tokens))));
  if (side * side != tokens) {
    throw ArgumentError("token count " + std::to_string(tokens) +
                        " is not a perfect square");
  }
  return side;
}

void check_timestep(int t, int timesteps) {
  if (t < 0 || t > timesteps) {
    throw ArgumentError("timestep " + std::to_string(t) + " outside [0, " +
                        std::to_string(timesteps) + "]");
  }
}

Tensor embed_tokens(const ToyModel& model, const Tensor& noised, int t) {
  check_timestep(t, model.dims.timesteps);
  Tensor h = dense_forward(model.embed_in, noised);
  const auto temb = model.time_embedding.row(static_cast<std::size_t>(t));
  for (std::size_t i = 0; i < h.rows(); ++i) {
    auto r = h.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] += temb[c];
  }
  return h;
}

}  // namespace

void validate(const ToyModel& model) {
  const auto& d = model.dims;
  if (model.blocks.size() != d.blocks) {
    throw DimensionError("model has " + std::to_string(model.blocks.size()) +
                         " blocks, dims say " + std::to_string(d.blocks));
  }
  if (model.embed_in.in_dim() != d.width || model.embed_in.out_dim() != d.width ||
      model.embed_out.in_dim() != d.width ||
      model.embed_out.out_dim() != d.width) {
    throw DimensionError("model embedders must be F x F");
  }
  if (model.time_embedding.rows() != static_cast<std::size_t>(d.timesteps) + 1 ||
      model.time_embedding.cols() != d.width) {
    throw DimensionError("time embedding must be (timesteps + 1) x F");
  }
  for (const auto& b : model.blocks) {
    validate(b);
    if (b.attention.model_dim() != d.width || b.attention.heads != d.heads ||
        b.attention.qk_dim != d.qk_dim || b.attention.v_dim != d.v_dim) {
      throw DimensionError("block dimensions disagree with model dims");
    }
  }
}

ToyModel make_teacher(const ModelDims& dims, std::uint64_t seed) {
  grid_side(dims.tokens);
  if (dims.timesteps < 1) throw ArgumentError("timesteps must be >= 1");
  SeededRng rng(seed);
  ToyModel model;
  model.dims = dims;
  model.embed_in = make_dense(dims.width, dims.width, rng);
  model.time_embedding =
      gaussian(rng, {static_cast<std::size_t>(dims.timesteps) + 1, dims.width});
  for (std::size_t b = 0; b < dims.blocks; ++b) {
    model.blocks.push_back(make_softmax_block(dims.block_dims(), rng));
  }
  model.embed_out = make_dense(dims.width, dims.width, rng);
  return model;
}

double alpha_bar(int t, int timesteps) {
  check_timestep(t, timesteps);
  return 1.0 - 0.98 * static_cast<double>(t) / static_cast<double>(timesteps);
}

Tensor noise_input(const Tensor& clean, const Tensor& noise, int t,
                   int timesteps) {
  const double a = alpha_bar(t, timesteps);
  Tensor out = scale(clean, std::sqrt(a));
  add_inplace(out, scale(noise, std::sqrt(1.0 - a)));
  return out;
}

std::vector<int> default_timesteps(int timesteps) {
  std::vector<int> ts;
  for (int t = 1; t <= timesteps; ++t) ts.push_back(t);
  return ts;
}

Tensor render_clean(SeededRng& rng, const ModelDims& dims) {
  const std::size_t side = grid_side(dims.tokens);
  const double s = static_cast<double>(side);
  Tensor frames({dims.tokens, kFrames});
  for (std::size_t blob = 0; blob < kBlobs; ++blob) {
    const double cx = s * rng.uniform();
    const double cy = s * rng.uniform();
    const double vx = 2.0 * rng.uniform() - 1.0;
    const double vy = 2.0 * rng.uniform() - 1.0;
    const double sigma = s * (0.08 + 0.12 * rng.uniform());
    const double amp = 0.5 + rng.uniform();
    for (std::size_t f = 0; f < kFrames; ++f) {
      const double px = cx + vx * static_cast<double>(f);
      const double py = cy + vy * static_cast<double>(f);
      for (std::size_t u = 0; u < side; ++u) {
        for (std::size_t w = 0; w < side; ++w) {
          // Wrapped distance on the torus.
          double dx = std::remainder(static_cast<double>(u) - px, s);
          double dy = std::remainder(static_cast<double>(w) - py, s);
          frames(u * side + w, f) +=
              amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
      }
    }
  }
  SeededRng embed_rng(kEmbeddingSeed);
  const Tensor lift = scale(gaussian(embed_rng, {kFrames, dims.width}), 1.5);
  return matmul(frames, lift);
}

std::vector<SyntheticSample> generate_synthetic(SeededRng& rng,
                                                std::size_t count,
                                                const ModelDims& dims) {
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    SyntheticSample s;
    s.clean = render_clean(rng, dims);
    s.timestep = 1 + static_cast<int>(
                         rng.below(static_cast<std::uint64_t>(dims.timesteps)));
    s.noise = gaussian(rng, {dims.tokens, dims.width});
    s.noised = noise_input(s.clean, s.noise, s.timestep, dims.timesteps);
    out.push_back(std::move(s));
  }
  return out;
}

Tensor denoise(const ToyModel& model, const Tensor& noised, int t) {
  Tensor h = embed_tokens(model, noised, t);
  for (const auto& block : model.blocks) h = block_forward(block, h);
  return dense_forward(model.embed_out, h);
}

ModelTrace trace_forward(const ToyModel& model, const Tensor& noised, int t) {
  ModelTrace trace;
  Tensor h = embed_tokens(model, noised, t);
  for (const auto& block : model.blocks) {
    trace.block_inputs.push_back(h);
    trace.attention_outputs.push_back(block_attention(block, h));
    h = block_forward(block, h);
  }
  trace.output = dense_forward(model.embed_out, h);
  return trace;
}

double denoising_loss(const ToyModel& model,
                      std::span<const SyntheticSample> samples) {
  if (samples.empty()) throw ArgumentError("denoising_loss: no samples");
  double total = 0.0;
  for (const auto& s : samples) {
    const Tensor pred = denoise(model, s.noised, s.timestep);
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - s.noise[i];
      sq += d * d;
    }
    total += sq / static_cast<double>(pred.size());
  }
  return total / static_cast<double>(samples.size());
}

double accumulate_denoising_gradient(const ToyModel& model,
                                     const SyntheticSample& sample,
                                     double weight, ToyModel& grad) {
  const Tensor embedded = embed_tokens(model, sample.noised, sample.timestep);
  std::vector<BlockTape> tapes(model.blocks.size());
  Tensor h = embedded;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    h = block_forward(model.blocks[b], h, tapes[b]);
  }
  const Tensor pred = dense_forward(model.embed_out, h);
  const double count = static_cast<double>(pred.size());
  Tensor dpred({pred.rows(), pred.cols()});
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - sample.noise[i];
    loss += d * d;
    dpred[i] = weight * 2.0 * d / count;
  }
  Tensor dh = dense_backward(model.embed_out, h, dpred, grad.embed_out);
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    dh = block_backward(model.blocks[b], tapes[b], dh, grad.blocks[b]);
  }
  auto dtemb = grad.time_embedding.row(static_cast<std::size_t>(sample.timestep));
  const Tensor col = column_sums(dh);
  for (std::size_t c = 0; c < dtemb.size(); ++c) dtemb[c] += col[c];
  dense_backward(model.embed_in, sample.noised, dh, grad.embed_in);
  return loss / count;
}

ToyModel train_model(ToyModel model, std::span<const SyntheticSample> data,
                     const TrainConfig& config) {
  validate(model);
  if (config.iters == 0) return model;
  if (data.empty()) throw ArgumentError("train_model: no training data");
  if (config.batch == 0) throw ArgumentError("train_model: batch must be >= 1");
  SeededRng rng(config.seed);
  AdamState state;
  const AdamWConfig adam{config.learning_rate, 0.9, 0.999, 1e-8,
                         config.weight_decay};
  const double w = 1.0 / static_cast<double>(config.batch);
  for (std::size_t it = 0; it < config.iters; ++it) {
    ToyModel grad = zeros_like(model);
    double loss = 0.0;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const auto& sample = data[rng.below(data.size())];
      loss += w * accumulate_denoising_gradient(model, sample, w, grad);
    }
    if (!std::isfinite(loss) || loss > config.divergence_threshold) {
      throw DivergenceError("training diverged at iteration " +
                            std::to_string(it) + " (loss " +
                            std::to_string(loss) + ")");
    }
    auto theta = flatten_params(model);
    adamw_step(theta, flatten_params(grad), state, adam);
    assign_params(model, theta);
  }
  return model;
}

ToyModel train_teacher(ToyModel model, std::span<const SyntheticSample> data,
                       const TrainConfig& config) {
  for (const auto& b : model.blocks) {
    if (b.kernel.kind != AttentionKind::kSoftmax) {
      throw ArgumentError("train_teacher: every block must be softmax");
    }
  }
  return train_model(std::move(model), data, config);
}

}  // namespace hybridize
