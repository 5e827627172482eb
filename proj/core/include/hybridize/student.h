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

#ifndef HYBRIDIZE_STUDENT_H_
#define HYBRIDIZE_STUDENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hybridize/distill.h"
#include "hybridize/serialize.h"
#include "hybridize/tables.h"
#include "hybridize/toymodel.h"

namespace hybridize {

// Feature-map checkpoints. Metadata records the block, rate, head count,
// degree P, slice width D' and every layer shape.
TensorArchive encode_phi(const FeatureMapPair& phi, std::size_t block,
                         int rate);
FeatureMapPair decode_phi(const TensorArchive& archive);

std::filesystem::path phi_checkpoint_path(const std::filesystem::path& dir,
                                          std::size_t block, int rate);
void save_phi_checkpoints(const std::filesystem::path& dir,
                          const PhiCheckpoints& checkpoints);
// Loads the checkpoint of every (block, rate > 1) in `plan`. Throws
// CheckpointError naming the first missing or mismatched pair.
PhiCheckpoints load_phi_checkpoints(const std::filesystem::path& dir,
                                    const RatePlan& plan);

// Copy of the teacher where block i runs hybrid attention at plan.rates[i]
// with its distilled feature maps. Rate-1 blocks stay softmax.
ToyModel assemble_student(const ToyModel& teacher, const RatePlan& plan,
                          const PhiCheckpoints& checkpoints,
                          Stabilizer mode = Stabilizer::kLiteral);

// Copies of `samples` whose target is the teacher's predicted noise rather
// than the drawn noise. The teacher is then an exact minimizer of the
// denoising loss, so finetuning on these moves the student toward it.
std::vector<SyntheticSample> teacher_labelled(
    const ToyModel& teacher, std::span<const SyntheticSample> samples);

// End-to-end finetuning defaults: 200 iterations at 1e-5.
TrainConfig finetune_defaults();
ToyModel finetune_student(ToyModel student,
                          std::span<const SyntheticSample> data,
                          const TrainConfig& config = finetune_defaults());

struct SeedFidelity {
  std::uint64_t seed = 0;
  double output_l1 = 0.0;              // mean over timesteps
  std::vector<double> attention_l1;    // per block, mean over timesteps
};

struct FidelityMetrics {
  std::vector<SeedFidelity> per_seed;
  double output_l1 = 0.0;            // mean over seeds
  std::vector<double> attention_l1;  // per block, mean over seeds

  double attention_l1_mean() const;
};

// For every seed and timestep: mean absolute difference of the denoiser
// outputs, and of each block's attention output when the student block is
// fed the teacher's block input.
FidelityMetrics evaluate_fidelity(const ToyModel& student,
                                  const ToyModel& teacher,
                                  std::span<const std::uint64_t> seeds,
                                  std::span<const int> timesteps);

// Whole-model checkpoints. `plan` is stored as provenance when given.
TensorArchive encode_model(const ToyModel& model,
                           const std::optional<RatePlan>& plan = {});
ToyModel decode_model(const TensorArchive& archive);
void save_model(const std::filesystem::path& path, const ToyModel& model,
                const std::optional<RatePlan>& plan = {});
ToyModel load_model(const std::filesystem::path& path);

}  // namespace hybridize

#endif  // HYBRIDIZE_STUDENT_H_
