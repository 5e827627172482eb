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

#include "hybridize/cli.h"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>

#include "hybridize/config.h"
#include "hybridize/errors.h"
#include "hybridize/pipeline.h"
#include "hybridize/serialize.h"

namespace hybridize::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::string config;
  std::string budget;
  std::string rates;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  std::string out;
  // flops only
  std::optional<std::size_t> tokens, head_dim, heads, blocks;
  // eval only
  std::string model;
};

void add_common(CLI::App* cmd, Flags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "Pipeline config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--budget", f.budget,
                  "FLOPs budget, absolute or as a percentage of softmax");
  cmd->add_option("--rates", f.rates, "Candidate rates, e.g. 1,2,4,8");
  cmd->add_option("--jobs", f.jobs, "Worker threads");
  cmd->add_option("--seed", f.seed, "Pipeline seed");
  cmd->add_option("--out", f.out, "Output directory");
}

PipelineConfig resolve(const Flags& f) {
  PipelineConfig c = f.config.empty() ? parse_config(json{{"version", 1}})
                                      : load_config(f.config);
  if (!f.rates.empty()) {
    c.rates = parse_rates(f.rates);
    c.feature_map.input_dim = c.dims.qk_dim;
  }
  if (!f.budget.empty()) {
    const double g = c.budget.granularity;
    c.budget = parse_budget(f.budget);
    c.budget.granularity = g;
  }
  if (f.jobs) {
    if (*f.jobs == 0) throw ConfigError("--jobs: must be > 0");
    c.jobs = *f.jobs;
  }
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output_dir = f.out;
  return c;
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

ToyModel load_teacher(const fs::path& dir) {
  const fs::path p = dir / kTeacherFile;
  if (!fs::exists(p)) {
    throw CheckpointError("missing teacher checkpoint " + p.string() +
                          " (run distill first)");
  }
  return load_model(p);
}

RatePlan load_plan(const fs::path& dir) {
  const fs::path p = dir / kPlanFile;
  if (!fs::exists(p)) {
    throw CheckpointError("missing plan " + p.string() + " (run plan first)");
  }
  try {
    return rate_plan_from_json(json::parse(read_text_file(p)));
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

ToyModel assemble(const PipelineConfig& c, const ToyModel& teacher,
                  const RatePlan& plan) {
  const PhiCheckpoints cps = load_phi_checkpoints(c.output_dir, plan);
  return assemble_student(teacher, plan, cps, c.distill.config.stabilizer);
}

int cmd_distill(const Flags& f, std::ostream& out, std::ostream& err) {
  const PipelineConfig c = resolve(f);
  ensure_directory(c.output_dir);
  const ToyModel teacher = build_teacher(c);
  save_model(c.output_dir / kTeacherFile, teacher);
  const ErrorTableBuild build = distill_all(c, teacher);
  write_text_file(c.output_dir / kErrorTableFile, json_text(to_json(build.table)));
  save_phi_checkpoints(c.output_dir, build.checkpoints);

  out << "block,rate,error\n";
  char buf[128];
  for (std::size_t b = 0; b < build.table.blocks(); ++b) {
    for (std::size_t r = 0; r < build.table.rates.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%zu,%d,%.17g\n", b, build.table.rates[r],
                    build.table.e[b][r]);
      out << buf;
    }
  }
  for (const auto& msg : build.failures) err << "diverged: " << msg << "\n";
  return build.failures.empty() ? kOk : kDiverged;
}

int cmd_plan(const Flags& f, std::ostream& out, std::ostream&) {
  const PipelineConfig c = resolve(f);
  const fs::path table_path = c.output_dir / kErrorTableFile;
  ErrorTable errors;
  try {
    errors = error_table_from_json(json::parse(read_text_file(table_path)));
  } catch (const json::exception& e) {
    throw ConfigError(table_path.string() + ": " + e.what());
  }
  if (!f.rates.empty() && errors.rates != c.rates) {
    throw ConfigError("--rates does not match the rates of " +
                      table_path.string());
  }
  const PlanOutcome p = make_plan(c, errors);
  write_text_file(c.output_dir / kCostTableFile, json_text(to_json(p.costs)));
  write_text_file(c.output_dir / kPlanFile, json_text(to_json(p.plan)));
  const std::string csv = std::string(kReductionCsvHeader) + "\n" +
                          reduction_csv_row("plan", p.report) + "\n";
  write_text_file(c.output_dir / kReductionFile, csv);
  out << csv;
  return kOk;
}

int cmd_finetune(const Flags& f, std::ostream& out, std::ostream&) {
  const PipelineConfig c = resolve(f);
  const ToyModel teacher = load_teacher(c.output_dir);
  const RatePlan plan = load_plan(c.output_dir);
  const ToyModel student = assemble(c, teacher, plan);
  const FinetuneOutcome r = finetune_and_measure(c, teacher, student);
  save_model(c.output_dir / kStudentFile, r.student, plan);
  const std::string csv = std::string(kMetricsCsvHeader) + "\n" +
                          metrics_rows("pre", r.before) +
                          metrics_rows("post", r.after);
  write_text_file(c.output_dir / kFinetuneMetricsFile, csv);
  out << csv;
  return kOk;
}

int cmd_eval(const Flags& f, std::ostream& out, std::ostream&) {
  const PipelineConfig c = resolve(f);
  const ToyModel teacher = load_teacher(c.output_dir);
  ToyModel student;
  if (!f.model.empty()) {
    if (!fs::exists(f.model)) {
      throw CheckpointError("missing model checkpoint " + f.model);
    }
    student = load_model(f.model);
  } else {
    student = assemble(c, teacher, load_plan(c.output_dir));
  }
  const std::string csv = std::string(kMetricsCsvHeader) + "\n" +
                          metrics_rows("eval", measure(c, teacher, student));
  write_text_file(c.output_dir / kEvalMetricsFile, csv);
  out << csv;
  return kOk;
}

int cmd_flops(const Flags& f, std::ostream& out, std::ostream&) {
  AttentionDims dims;
  std::vector<int> rates{1, 2, 4, 8};
  if (!f.config.empty()) {
    const PipelineConfig c = resolve(f);
    dims = c.attention_dims();
    rates = c.rates;
  } else {
    // Video-scale defaults: 12 heads of width 128 over 32768 tokens.
    dims.tokens = 32768;
    dims.qk_dim = dims.v_dim = 128;
    dims.heads = 12;
    if (!f.rates.empty()) rates = parse_rates(f.rates);
  }
  if (f.tokens) dims.tokens = *f.tokens;
  if (f.head_dim) dims.qk_dim = dims.v_dim = *f.head_dim;
  if (f.heads) dims.heads = *f.heads;
  const std::size_t blocks = f.blocks.value_or(30);
  if (dims.tokens == 0 || dims.qk_dim == 0 || dims.heads == 0 || blocks == 0) {
    throw ConfigError("flops: dimensions must be > 0");
  }

  std::string rate_csv = "rate,flops,relative_to_softmax\n";
  const double softmax = flops_attention(KernelConfig::softmax(), dims);
  char buf[160];
  for (int r : rates) {
    const double fl = flops_attention(KernelConfig::hybrid(r), dims);
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.6f\n", r, fl, fl / softmax);
    rate_csv += buf;
  }
  std::string grid = std::string(kReductionCsvHeader) + "\n";
  grid += reduction_csv_row("all_softmax",
                            reduction_report(std::vector<int>(blocks, 1), dims)) +
          "\n";
  for (std::size_t k : {15, 20, 25}) {
    if (k > blocks) continue;
    for (int r : {2, 4, 8}) {
      std::vector<int> plan(blocks, 1);
      std::fill_n(plan.begin(), k, r);
      grid += reduction_csv_row(std::to_string(k) + "xR" + std::to_string(r),
                                reduction_report(plan, dims)) +
              "\n";
    }
  }
  if (!f.out.empty()) {
    ensure_directory(f.out);
    write_text_file(fs::path(f.out) / "flops.csv", rate_csv);
    write_text_file(fs::path(f.out) / "reduction_grid.csv", grid);
  }
  out << rate_csv << "\n" << grid;
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Attention hybridization pipeline", "hybridize"};
  app.require_subcommand(1);
  Flags f;
  auto* distill = app.add_subcommand("distill", "Distill feature maps per block and rate");
  auto* plan = app.add_subcommand("plan", "Pick one rate per block under a FLOPs budget");
  auto* finetune = app.add_subcommand("finetune", "Assemble, finetune and score the student");
  auto* eval = app.add_subcommand("eval", "Score the assembled student against the teacher");
  auto* flops = app.add_subcommand("flops", "Attention FLOPs and reduction report");
  for (auto* cmd : {distill, plan, finetune, eval}) add_common(cmd, f, true);
  add_common(flops, f, false);
  eval->add_option("--model", f.model, "Score this model checkpoint instead");
  flops->add_option("--tokens", f.tokens, "Sequence length N");
  flops->add_option("--head-dim", f.head_dim, "Per-head width D = M");
  flops->add_option("--heads", f.heads, "Head count H");
  flops->add_option("--blocks", f.blocks, "Blocks in the grid model (default 30)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kBadConfig;
  }

  try {
    if (distill->parsed()) return cmd_distill(f, out, err);
    if (plan->parsed()) return cmd_plan(f, out, err);
    if (finetune->parsed()) return cmd_finetune(f, out, err);
    if (eval->parsed()) return cmd_eval(f, out, err);
    return cmd_flops(f, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const InfeasibleError& e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", e.minimal_cost());
    err << "infeasible: " << e.what() << " (minimal cost " << buf << ")\n";
    return kInfeasible;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kMissingCheckpoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace hybridize::cli
