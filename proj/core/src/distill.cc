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

#include "hybridize/distill.h"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "hybridize/errors.h"
#include "hybridize/numerics.h"

namespace hybridize {

TrajectoryCache cache_teacher_trajectory(const ToyModel& teacher,
                                         std::span<const std::uint64_t> seeds,
                                         std::span<const int> timesteps) {
  validate(teacher);
  if (timesteps.empty()) throw ArgumentError("no distillation timesteps");
  TrajectoryCache cache;
  for (std::uint64_t seed : seeds) {
    SeededRng rng(seed);
    const Tensor clean = render_clean(rng, teacher.dims);
    const Tensor noise = gaussian(rng, {teacher.dims.tokens, teacher.dims.width});
    for (int t : timesteps) {
      ModelTrace trace = trace_forward(
          teacher, noise_input(clean, noise, t, teacher.dims.timesteps), t);
      cache.entries.push_back({seed, t, std::move(trace.block_inputs),
                               std::move(trace.attention_outputs)});
    }
  }
  return cache;
}

double loss_value_distill(const Tensor& target, const Tensor& predicted) {
  if (target.shape() != predicted.shape()) {
    throw DimensionError("loss_value_distill: shape " +
                         shape_string(target.shape()) + " vs " +
                         shape_string(predicted.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    total += std::abs(target[i] - predicted[i]);
  }
  return total / static_cast<double>(target.size());
}

namespace {

// Per head: residual r_ij = exp(clamp(a_ij)) - phi_q_i . phi_k_j.
Tensor kernel_residual(const Tensor& q, const Tensor& k, const Tensor& fq,
                       const Tensor& fk) {
  if (q.cols() != k.cols() || q.rows() != fq.rows() || k.rows() != fk.rows() ||
      fq.cols() != fk.cols()) {
    throw DimensionError("loss_attention_distill: inconsistent head shapes");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor r = matmul_nt(q, k);
  const Tensor sim = matmul_nt(fq, fk);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double a = std::clamp(r[i] * inv_sqrt_d, -kLogitClamp, kLogitClamp);
    r[i] = std::exp(a) - sim[i];
  }
  return r;
}

double mean_square(std::span<const Tensor> residuals) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : residuals) {
    for (double x : r.data()) total += x * x;
    count += r.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace

double loss_attention_distill(std::span<const Tensor> q,
                              std::span<const Tensor> k,
                              std::span<const Tensor> phi_q_rows,
                              std::span<const Tensor> phi_k_rows) {
  if (q.empty() || q.size() != k.size() || q.size() != phi_q_rows.size() ||
      q.size() != phi_k_rows.size()) {
    throw DimensionError("loss_attention_distill: head counts differ");
  }
  std::vector<Tensor> residuals;
  for (std::size_t h = 0; h < q.size(); ++h) {
    residuals.push_back(kernel_residual(q[h], k[h], phi_q_rows[h], phi_k_rows[h]));
  }
  return std::log1p(mean_square(residuals));
}

double loss_attention_distill(const Projections& p,
                              const FeatureMapPair& phi) {
  std::vector<Tensor> fq, fk;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    fq.push_back(apply_feature_map(phi.query.at(h), p.q[h]));
    fk.push_back(apply_feature_map(phi.key.at(h), p.k[h]));
  }
  return loss_attention_distill(p.q, p.k, fq, fk);
}

double value_distill_gradient(const Projections& p, const Tensor& target,
                              const FeatureMapPair& phi,
                              const KernelConfig& kernel, double weight,
                              FeatureMapPair& grad) {
  AttentionTape tape;
  const Tensor out = attention_forward(p, &phi, kernel, tape);
  const double loss = loss_value_distill(target, out);
  const double scale = weight / static_cast<double>(out.size());
  Tensor dout({out.rows(), out.cols()});
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - target[i];
    dout[i] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
  }
  const AttentionGrads g = attention_backward(p, &phi, tape, dout);
  if (g.phi) accumulate_params(grad, *g.phi);
  return loss;
}

double attention_distill_gradient(const Projections& p,
                                  const FeatureMapPair& phi, double weight,
                                  FeatureMapPair& grad) {
  const std::size_t heads = p.heads();
  std::vector<FeatureMapTape> tq(heads), tk(heads);
  std::vector<Tensor> fq, fk, residuals;
  for (std::size_t h = 0; h < heads; ++h) {
    fq.push_back(apply_feature_map(phi.query.at(h), p.q[h], tq[h]));
    fk.push_back(apply_feature_map(phi.key.at(h), p.k[h], tk[h]));
    residuals.push_back(kernel_residual(p.q[h], p.k[h], fq[h], fk[h]));
  }
  const double mse = mean_square(residuals);
  std::size_t count = 0;
  for (const auto& r : residuals) count += r.size();
  // d log1p(mse) / d sim_ij = -2 r_ij / (count (1 + mse)).
  const double coeff = -2.0 * weight / (static_cast<double>(count) * (1.0 + mse));
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor dsim = scale(residuals[h], coeff);
    feature_map_backward(phi.query[h], tq[h], matmul(dsim, fk[h]),
                         grad.query[h]);
    feature_map_backward(phi.key[h], tk[h], matmul_tn(dsim, fq[h]),
                         grad.key[h]);
  }
  return std::log1p(mse);
}

BlockDataset make_block_dataset(const AttentionWeights& weights,
                                const TrajectoryCache& train,
                                const TrajectoryCache& heldout,
                                std::size_t block) {
  auto convert = [&](const TrajectoryCache& cache) {
    std::vector<DistillSample> out;
    for (const auto& e : cache.entries) {
      if (block >= e.block_inputs.size()) {
        throw ArgumentError("trajectory cache does not cover block " +
                            std::to_string(block));
      }
      out.push_back({project_qkv(e.block_inputs[block], weights),
                     e.attention_outputs[block]});
    }
    return out;
  };
  return {convert(train), convert(heldout)};
}

double heldout_error(std::span<const DistillSample> samples,
                     const FeatureMapPair& phi, int rate, Stabilizer mode) {
  if (samples.empty()) throw ArgumentError("heldout_error: no samples");
  double total = 0.0;
  for (const auto& s : samples) {
    const TokenPartition part = partition_tokens(s.proj.tokens(), rate);
    total += loss_value_distill(s.target,
                                hybrid_attention(s.proj, phi, part, mode));
  }
  return total / static_cast<double>(samples.size());
}

DistillResult distill_block(const BlockDataset& data, FeatureMapPair init,
                            int rate, const DistillConfig& config) {
  if (config.batch == 0 || config.update_repeats == 0 ||
      !(config.learning_rate > 0.0)) {
    throw ArgumentError("distill config needs batch, repeats, rate > 0");
  }
  if (data.train.empty() || data.heldout.empty()) {
    throw ArgumentError("distill_block: empty train or held-out set");
  }
  DistillResult result;
  result.phi = std::move(init);
  const TokenPartition part =
      partition_tokens(data.train.front().proj.tokens(), rate);
  if (part.linear_indices().empty()) return result;  // exact: zero error

  const KernelConfig kernel = KernelConfig::hybrid(rate, config.stabilizer);
  const AdamWConfig adam{config.learning_rate, 0.9, 0.999, 1e-8, 0.0};
  AdamState state;
  SeededRng rng(config.seed);
  const double w = 1.0 / static_cast<double>(config.batch);

  result.initial_error =
      heldout_error(data.heldout, result.phi, rate, config.stabilizer);
  double previous = result.initial_error;
  result.final_error = previous;
  std::vector<std::size_t> batch(config.batch);
  for (std::size_t round = 0; round < config.max_rounds; ++round) {
    for (auto& idx : batch) idx = rng.below(data.train.size());
    for (std::size_t u = 0; u < config.update_repeats; ++u) {
      FeatureMapPair grad = zeros_like(result.phi);
      double loss = 0.0;
      for (std::size_t idx : batch) {
        const auto& s = data.train[idx];
        loss += w * (config.loss == LossKind::kValue
                         ? value_distill_gradient(s.proj, s.target, result.phi,
                                                  kernel, w, grad)
                         : attention_distill_gradient(s.proj, result.phi, w,
                                                      grad));
      }
      if (!std::isfinite(loss) || loss > config.divergence_threshold) {
        throw DivergenceError("distillation diverged at update " +
                              std::to_string(result.updates) + " (loss " +
                              std::to_string(loss) + ")");
      }
      auto theta = flatten_params(result.phi);
      adamw_step(theta, flatten_params(grad), state, adam);
      assign_params(result.phi, theta);
      result.train_losses.push_back(loss);
      ++result.updates;
    }
    const double err =
        heldout_error(data.heldout, result.phi, rate, config.stabilizer);
    result.heldout_errors.push_back(err);
    result.final_error = err;
    if (config.tolerance > 0.0 && previous - err < config.tolerance * previous) {
      break;
    }
    previous = err;
  }
  return result;
}

std::uint64_t block_seed(std::uint64_t seed, std::size_t block) {
  return mix_seed(seed, 0xB10C0000ULL + block);
}

ErrorTableBuild build_error_table(const ToyModel& teacher,
                                  const TrajectoryCache& train,
                                  const TrajectoryCache& heldout,
                                  std::span<const int> rates,
                                  const FeatureMapSpec& phi_spec,
                                  const DistillConfig& config,
                                  std::size_t jobs) {
  validate(teacher);
  if (rates.empty()) throw ArgumentError("no candidate rates");
  if (heldout.entries.empty()) throw ArgumentError("empty held-out cache");
  const std::size_t blocks = teacher.blocks.size();
  const std::size_t nr = rates.size();

  std::vector<BlockDataset> datasets;
  for (std::size_t b = 0; b < blocks; ++b) {
    datasets.push_back(
        make_block_dataset(teacher.blocks[b].attention, train, heldout, b));
  }
  FeatureMapSpec spec = phi_spec;
  spec.input_dim = teacher.dims.qk_dim;

  struct Slot {
    double error = 0.0;
    bool has_phi = false;
    FeatureMapPair phi;
    std::string failure;
  };
  std::vector<Slot> slots(blocks * nr);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < slots.size(); job = next++) {
      const std::size_t b = job / nr;
      const int rate = rates[job % nr];
      Slot& slot = slots[job];
      SeededRng init_rng(block_seed(config.seed, b));
      FeatureMapPair init =
          make_feature_map_pair(spec, teacher.dims.heads, init_rng);
      DistillConfig cfg = config;
      cfg.seed = mix_seed(block_seed(config.seed, b), 1);
      try {
        DistillResult r = distill_block(datasets[b], std::move(init), rate, cfg);
        slot.error = r.final_error;
        if (rate != 1) {
          slot.phi = std::move(r.phi);
          slot.has_phi = true;
        }
      } catch (const DivergenceError& e) {
        slot.error = std::numeric_limits<double>::infinity();
        slot.failure = "block " + std::to_string(b) + " rate " +
                       std::to_string(rate) + ": " + e.what();
      } catch (const NumericError& e) {
        slot.error = std::numeric_limits<double>::infinity();
        slot.failure = "block " + std::to_string(b) + " rate " +
                       std::to_string(rate) + ": " + e.what();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, slots.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ErrorTableBuild out;
  out.table.rates.assign(rates.begin(), rates.end());
  out.table.e.assign(blocks, std::vector<double>(nr, 0.0));
  out.table.validation_seed = heldout.entries.front().seed;
  out.table.sample_count = heldout.entries.size();
  for (std::size_t job = 0; job < slots.size(); ++job) {
    const std::size_t b = job / nr;
    out.table.e[b][job % nr] = slots[job].error;
    if (slots[job].has_phi) {
      out.checkpoints.emplace(std::make_pair(b, rates[job % nr]),
                              std::move(slots[job].phi));
    }
    if (!slots[job].failure.empty()) out.failures.push_back(slots[job].failure);
  }
  return out;
}

}  // namespace hybridize
