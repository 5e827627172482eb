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

#ifndef HYBRIDIZE_TOOLS_CONFIG_H_
#define HYBRIDIZE_TOOLS_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybridize/distill.h"
#include "hybridize/feature_map.h"
#include "hybridize/optim.h"
#include "hybridize/student.h"
#include "hybridize/tables.h"
#include "hybridize/toymodel.h"

namespace hybridize::cli {

inline constexpr int kConfigVersion = 1;

enum class TeacherMode { kTrained, kRandom };
enum class PlanMode { kMckp, kHomogeneous };
// What the finetuning loss regresses onto: the teacher's predicted noise or
// the drawn noise of the synthetic data.
enum class FinetuneTargets { kTeacher, kData };

struct TeacherSettings {
  TeacherMode mode = TeacherMode::kTrained;
  std::size_t samples = 64;
  TrainConfig train;  // iters 500, lr 1e-3
};

struct DistillSettings {
  DistillConfig config;
  std::size_t train_seeds = 8;
  std::size_t heldout_seeds = 2;
};

// Budget as absolute FLOPs or as a fraction of the all-softmax cost.
struct BudgetSettings {
  std::optional<double> flops;
  std::optional<double> fraction;
  double granularity = 0.0;
};

// Shape the planner prices. Unset fields follow the model; setting them
// plans for a projected deployment size instead of the distilled fixture.
struct CostModelSettings {
  std::optional<std::size_t> tokens;
  std::optional<std::size_t> head_dim;  // D = M
  std::optional<std::size_t> heads;
};

struct PlanSettings {
  PlanMode mode = PlanMode::kMckp;
  std::size_t count = 0;  // homogeneous: number of converted blocks
  int rate = 2;           // homogeneous: shared rate
};

struct FinetuneSettings {
  TrainConfig train = finetune_defaults();  // 200 iters at 1e-5
  std::size_t samples = 64;
  FinetuneTargets targets = FinetuneTargets::kTeacher;
};

struct PipelineConfig {
  ModelDims dims;
  TeacherSettings teacher;
  FeatureMapSpec feature_map;
  std::vector<int> rates{1, 2, 4, 8};
  DistillSettings distill;
  BudgetSettings budget;
  CostModelSettings cost_model;
  PlanSettings plan;
  FinetuneSettings finetune;
  std::size_t eval_seeds = 4;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::size_t jobs = 1;

  AttentionDims attention_dims() const;
  AttentionDims cost_dims() const;
};

// Strict parse: unknown keys, wrong types and out-of-range values throw
// ConfigError with the offending JSON path.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& c);

// "1,2,4,8" -> {1, 2, 4, 8}; rejects duplicates, rates < 1 and a missing 1.
std::vector<int> parse_rates(const std::string& text);
// "3.5e6" -> flops; "80%" -> fraction 0.8.
BudgetSettings parse_budget(const std::string& text);

}  // namespace hybridize::cli

#endif  // HYBRIDIZE_TOOLS_CONFIG_H_
