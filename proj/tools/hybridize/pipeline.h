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

#ifndef HYBRIDIZE_TOOLS_PIPELINE_H_
#define HYBRIDIZE_TOOLS_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hybridize/config.h"
#include "hybridize/distill.h"
#include "hybridize/planner.h"
#include "hybridize/student.h"

namespace hybridize::cli {

// Independent seed streams derived from the pipeline seed.
enum class Stream : std::uint64_t {
  kTeacherInit = 1,
  kTeacherData = 2,
  kTeacherOrder = 3,
  kDistillTrain = 4,
  kDistillHeldout = 5,
  kFinetuneData = 6,
  kFinetuneOrder = 7,
  kEval = 8,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream stream);
std::vector<std::uint64_t> stream_seeds(std::uint64_t seed, Stream stream,
                                        std::size_t count);

// Artifact names inside the output directory.
inline constexpr const char* kTeacherFile = "teacher.bin";
inline constexpr const char* kErrorTableFile = "error_table.json";
inline constexpr const char* kCostTableFile = "cost_table.json";
inline constexpr const char* kPlanFile = "plan.json";
inline constexpr const char* kReductionFile = "reduction.csv";
inline constexpr const char* kStudentFile = "student.bin";
inline constexpr const char* kFinetuneMetricsFile = "finetune_metrics.csv";
inline constexpr const char* kEvalMetricsFile = "eval_metrics.csv";

inline constexpr const char* kMetricsCsvHeader =
    "stage,seed,output_l1,attention_l1_mean";

// Random mode returns the initialization; trained mode fits it to
// synthetic denoising data first.
ToyModel build_teacher(const PipelineConfig& config);

ErrorTableBuild distill_all(const PipelineConfig& config,
                            const ToyModel& teacher);

// Absolute budget: flops as given, fraction times the all-softmax cost, or
// +inf when neither is set.
double resolve_budget(const BudgetSettings& budget, const CostTable& costs);

struct PlanOutcome {
  CostTable costs;
  RatePlan plan;
  ReductionReport report;
};
// Throws InfeasibleError when no plan fits the budget.
PlanOutcome make_plan(const PipelineConfig& config, const ErrorTable& errors);

struct FinetuneOutcome {
  ToyModel student;
  FidelityMetrics before;
  FidelityMetrics after;
};
FinetuneOutcome finetune_and_measure(const PipelineConfig& config,
                                     const ToyModel& teacher,
                                     const ToyModel& student);
FidelityMetrics measure(const PipelineConfig& config, const ToyModel& teacher,
                        const ToyModel& student);

// Per-seed rows followed by a "mean" row, under kMetricsCsvHeader.
std::string metrics_rows(const std::string& stage, const FidelityMetrics& m);

// Creates the directory (and parents); IoError when that fails.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace hybridize::cli

#endif  // HYBRIDIZE_TOOLS_PIPELINE_H_
