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

#include "hybridize/pipeline.h"

#include <cmath>
#include <cstdio>
#include <limits>

#include "hybridize/errors.h"

namespace hybridize::cli {

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
  return mix_seed(seed, static_cast<std::uint64_t>(stream) << 32);
}

std::vector<std::uint64_t> stream_seeds(std::uint64_t seed, Stream stream,
                                        std::size_t count) {
  const std::uint64_t base = stream_seed(seed, stream);
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(mix_seed(base, i));
  return out;
}

ToyModel build_teacher(const PipelineConfig& config) {
  ToyModel teacher =
      make_teacher(config.dims, stream_seed(config.seed, Stream::kTeacherInit));
  if (config.teacher.mode == TeacherMode::kRandom) return teacher;
  SeededRng rng(stream_seed(config.seed, Stream::kTeacherData));
  const auto data = generate_synthetic(rng, config.teacher.samples, config.dims);
  TrainConfig train = config.teacher.train;
  train.seed = stream_seed(config.seed, Stream::kTeacherOrder);
  return train_teacher(std::move(teacher), data, train);
}

ErrorTableBuild distill_all(const PipelineConfig& config,
                            const ToyModel& teacher) {
  const auto steps = default_timesteps(config.dims.timesteps);
  const auto train_seeds = stream_seeds(config.seed, Stream::kDistillTrain,
                                        config.distill.train_seeds);
  const auto heldout_seeds = stream_seeds(config.seed, Stream::kDistillHeldout,
                                          config.distill.heldout_seeds);
  const TrajectoryCache train =
      cache_teacher_trajectory(teacher, train_seeds, steps);
  const TrajectoryCache heldout =
      cache_teacher_trajectory(teacher, heldout_seeds, steps);
  DistillConfig dc = config.distill.config;
  dc.seed = config.seed;
  return build_error_table(teacher, train, heldout, config.rates,
                           config.feature_map, dc, config.jobs);
}

double resolve_budget(const BudgetSettings& budget, const CostTable& costs) {
  if (budget.flops) return *budget.flops;
  if (budget.fraction) {
    const std::size_t r1 = rate_index(costs.rates, 1);
    double softmax = 0.0;
    for (const auto& row : costs.c) softmax += row[r1];
    return *budget.fraction * softmax;
  }
  return std::numeric_limits<double>::infinity();
}

PlanOutcome make_plan(const PipelineConfig& config, const ErrorTable& errors) {
  if (errors.blocks() != config.dims.blocks) {
    throw ConfigError("error table has " + std::to_string(errors.blocks()) +
                      " blocks, config says " +
                      std::to_string(config.dims.blocks));
  }
  PlanOutcome out;
  const AttentionDims dims = config.cost_dims();
  out.costs = build_cost_table(dims, errors.rates, errors.blocks());
  if (config.plan.mode == PlanMode::kMckp) {
    out.plan = solve_mckp(errors, out.costs,
                          {resolve_budget(config.budget, out.costs),
                           config.budget.granularity});
  } else {
    out.plan = homogeneous_select(errors, out.costs, config.plan.rate,
                                  config.plan.count);
  }
  out.report = reduction_report(out.plan, dims);
  return out;
}

FidelityMetrics measure(const PipelineConfig& config, const ToyModel& teacher,
                        const ToyModel& student) {
  const auto seeds =
      stream_seeds(config.seed, Stream::kEval, config.eval_seeds);
  const auto steps = default_timesteps(config.dims.timesteps);
  return evaluate_fidelity(student, teacher, seeds, steps);
}

FinetuneOutcome finetune_and_measure(const PipelineConfig& config,
                                     const ToyModel& teacher,
                                     const ToyModel& student) {
  FinetuneOutcome out;
  out.before = measure(config, teacher, student);
  SeededRng rng(stream_seed(config.seed, Stream::kFinetuneData));
  auto data = generate_synthetic(rng, config.finetune.samples, config.dims);
  if (config.finetune.targets == FinetuneTargets::kTeacher) {
    data = teacher_labelled(teacher, data);
  }
  TrainConfig train = config.finetune.train;
  train.seed = stream_seed(config.seed, Stream::kFinetuneOrder);
  out.student = finetune_student(student, data, train);
  out.after = measure(config, teacher, out.student);
  return out;
}

std::string metrics_rows(const std::string& stage, const FidelityMetrics& m) {
  std::string out;
  char buf[256];
  for (const auto& s : m.per_seed) {
    double att = 0.0;
    for (double v : s.attention_l1) att += v;
    if (!s.attention_l1.empty()) att /= static_cast<double>(s.attention_l1.size());
    std::snprintf(buf, sizeof buf, "%s,%llu,%.17g,%.17g\n", stage.c_str(),
                  static_cast<unsigned long long>(s.seed), s.output_l1, att);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%s,mean,%.17g,%.17g\n", stage.c_str(),
                m.output_l1, m.attention_l1_mean());
  out += buf;
  return out;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

}  // namespace hybridize::cli
