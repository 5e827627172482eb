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

#include "hybridize/config.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hybridize/errors.h"
#include "hybridize/serialize.h"

namespace hybridize::cli {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so the rest
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path(key), "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path(key), "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path(key), "expected a number");
      out = v.get<double>();
      if (!std::isfinite(out)) fail(path(key), "must be finite");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) {
        fail(path(key), "expected a non-negative integer");
      }
      out = v.get<T>();
    } else {
      if (!v.is_number_integer()) fail(path(key), "expected an integer");
      out = v.get<T>();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(path(key), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& where,
                                const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) ObjectReader::fail(where, what);
}

void read_train(ObjectReader& r, TrainConfig& t, const std::string& where) {
  r.read("iters", t.iters);
  r.read("learning_rate", t.learning_rate);
  r.read("batch", t.batch);
  r.read("weight_decay", t.weight_decay);
  r.read("divergence_threshold", t.divergence_threshold);
  require(t.learning_rate > 0.0, where + ".learning_rate", "must be > 0");
  require(t.batch > 0, where + ".batch", "must be > 0");
  require(t.weight_decay >= 0.0, where + ".weight_decay", "must be >= 0");
  require(t.divergence_threshold > 0.0, where + ".divergence_threshold",
          "must be > 0");
}

void check_rates(const std::vector<int>& rates, const std::string& where) {
  require(!rates.empty(), where, "needs at least one rate");
  std::set<int> uniq;
  for (int r : rates) {
    require(r >= 1, where, "rates must be >= 1");
    require(uniq.insert(r).second, where, "duplicate rate " + std::to_string(r));
  }
  require(uniq.count(1) == 1, where, "rate 1 (softmax) must be a candidate");
}

const char* name(TeacherMode m) {
  return m == TeacherMode::kTrained ? "trained" : "random";
}
const char* name(PlanMode m) {
  return m == PlanMode::kMckp ? "mckp" : "homogeneous";
}
const char* name(FinetuneTargets t) {
  return t == FinetuneTargets::kTeacher ? "teacher" : "data";
}
const char* name(LossKind k) {
  return k == LossKind::kValue ? "value" : "attention";
}
const char* name(Stabilizer s) {
  return s == Stabilizer::kLiteral ? "literal" : "consistent";
}

}  // namespace

AttentionDims PipelineConfig::attention_dims() const {
  AttentionDims a;
  a.tokens = dims.tokens;
  a.qk_dim = dims.qk_dim;
  a.v_dim = dims.v_dim;
  a.heads = dims.heads;
  a.degree = feature_map.degree;
  a.slice_width = feature_map.slice_width;
  a.phi_depth = feature_map.depth;
  a.phi_hidden = feature_map.hidden_width;
  return a;
}

AttentionDims PipelineConfig::cost_dims() const {
  AttentionDims a = attention_dims();
  if (cost_model.tokens) a.tokens = *cost_model.tokens;
  if (cost_model.head_dim) a.qk_dim = a.v_dim = *cost_model.head_dim;
  if (cost_model.heads) a.heads = *cost_model.heads;
  return a;
}

PipelineConfig parse_config(const json& j) {
  PipelineConfig c;
  ObjectReader root(j, "$");
  require(root.has("version"), "$.version", "required");
  const json& version = root.at("version");
  require(version.is_number_integer() && version.get<int>() == kConfigVersion,
          "$.version", "unsupported version (expected " +
                           std::to_string(kConfigVersion) + ")");

  if (root.has("dims")) {
    ObjectReader r(root.at("dims"), "$.dims");
    ModelDims& d = c.dims;
    r.read("blocks", d.blocks);
    r.read("tokens", d.tokens);
    r.read("width", d.width);
    r.read("heads", d.heads);
    r.read("qk_dim", d.qk_dim);
    r.read("v_dim", d.v_dim);
    r.read("mlp_hidden", d.mlp_hidden);
    r.read("timesteps", d.timesteps);
    r.finish();
    for (auto [k, v] : {std::pair{"blocks", d.blocks}, {"tokens", d.tokens},
                        {"width", d.width}, {"heads", d.heads},
                        {"qk_dim", d.qk_dim}, {"v_dim", d.v_dim},
                        {"mlp_hidden", d.mlp_hidden}}) {
      require(v > 0, std::string("$.dims.") + k, "must be > 0");
    }
    const auto side = static_cast<std::size_t>(
        std::llround(std::sqrt(static_cast<double>(d.tokens))));
    require(side * side == d.tokens, "$.dims.tokens",
            "must be a perfect square");
    require(d.timesteps >= 1, "$.dims.timesteps", "must be >= 1");
  }

  if (root.has("teacher")) {
    ObjectReader r(root.at("teacher"), "$.teacher");
    std::string mode = name(c.teacher.mode);
    r.read("mode", mode);
    require(mode == "trained" || mode == "random", "$.teacher.mode",
            "expected \"trained\" or \"random\"");
    c.teacher.mode = mode == "trained" ? TeacherMode::kTrained
                                       : TeacherMode::kRandom;
    r.read("samples", c.teacher.samples);
    read_train(r, c.teacher.train, "$.teacher");
    r.finish();
    require(c.teacher.samples > 0, "$.teacher.samples", "must be > 0");
  }

  if (root.has("feature_map")) {
    ObjectReader r(root.at("feature_map"), "$.feature_map");
    FeatureMapSpec& f = c.feature_map;
    r.read("degree", f.degree);
    r.read("slice_width", f.slice_width);
    r.read("depth", f.depth);
    r.read("hidden_width", f.hidden_width);
    r.finish();
    require(f.degree >= 1, "$.feature_map.degree", "must be >= 1");
    require(f.depth >= 1, "$.feature_map.depth", "must be >= 1");
  }
  c.feature_map.input_dim = c.dims.qk_dim;

  if (root.has("rates")) {
    const json& jr = root.at("rates");
    require(jr.is_array(), "$.rates", "expected an array of integers");
    c.rates.clear();
    for (const auto& v : jr) {
      require(v.is_number_integer(), "$.rates", "expected integers");
      c.rates.push_back(v.get<int>());
    }
  }
  check_rates(c.rates, "$.rates");

  if (root.has("distill")) {
    ObjectReader r(root.at("distill"), "$.distill");
    DistillConfig& d = c.distill.config;
    r.read("batch", d.batch);
    r.read("update_repeats", d.update_repeats);
    r.read("learning_rate", d.learning_rate);
    r.read("max_rounds", d.max_rounds);
    r.read("tolerance", d.tolerance);
    r.read("divergence_threshold", d.divergence_threshold);
    std::string loss = name(d.loss), stab = name(d.stabilizer);
    r.read("loss", loss);
    r.read("stabilizer", stab);
    require(loss == "value" || loss == "attention", "$.distill.loss",
            "expected \"value\" or \"attention\"");
    require(stab == "literal" || stab == "consistent", "$.distill.stabilizer",
            "expected \"literal\" or \"consistent\"");
    d.loss = loss == "value" ? LossKind::kValue : LossKind::kAttention;
    d.stabilizer =
        stab == "literal" ? Stabilizer::kLiteral : Stabilizer::kConsistent;
    r.read("train_seeds", c.distill.train_seeds);
    r.read("heldout_seeds", c.distill.heldout_seeds);
    r.finish();
    require(d.batch > 0, "$.distill.batch", "must be > 0");
    require(d.update_repeats > 0, "$.distill.update_repeats", "must be > 0");
    require(d.learning_rate > 0.0, "$.distill.learning_rate", "must be > 0");
    require(d.max_rounds > 0, "$.distill.max_rounds", "must be > 0");
    require(c.distill.train_seeds > 0, "$.distill.train_seeds", "must be > 0");
    require(c.distill.heldout_seeds > 0, "$.distill.heldout_seeds",
            "must be > 0");
  }

  if (root.has("budget")) {
    ObjectReader r(root.at("budget"), "$.budget");
    double v = 0.0;
    if (r.has("flops")) {
      r.read("flops", v);
      require(v > 0.0, "$.budget.flops", "must be > 0");
      c.budget.flops = v;
    }
    if (r.has("fraction")) {
      r.read("fraction", v);
      require(v > 0.0, "$.budget.fraction", "must be > 0");
      c.budget.fraction = v;
    }
    r.read("granularity", c.budget.granularity);
    r.finish();
    require(!(c.budget.flops && c.budget.fraction), "$.budget",
            "give either flops or fraction, not both");
    require(c.budget.granularity >= 0.0, "$.budget.granularity",
            "must be >= 0");
  }

  if (root.has("cost_model")) {
    ObjectReader r(root.at("cost_model"), "$.cost_model");
    for (auto [key, field] :
         {std::pair{"tokens", &c.cost_model.tokens},
          {"head_dim", &c.cost_model.head_dim},
          {"heads", &c.cost_model.heads}}) {
      if (!r.has(key)) continue;
      std::size_t v = 0;
      r.read(key, v);
      require(v > 0, r.path(key), "must be > 0");
      *field = v;
    }
    r.finish();
  }

  if (root.has("plan")) {
    ObjectReader r(root.at("plan"), "$.plan");
    std::string mode = name(c.plan.mode);
    r.read("mode", mode);
    require(mode == "mckp" || mode == "homogeneous", "$.plan.mode",
            "expected \"mckp\" or \"homogeneous\"");
    c.plan.mode = mode == "mckp" ? PlanMode::kMckp : PlanMode::kHomogeneous;
    r.read("count", c.plan.count);
    r.read("rate", c.plan.rate);
    r.finish();
    if (c.plan.mode == PlanMode::kHomogeneous) {
      require(c.plan.count <= c.dims.blocks, "$.plan.count",
              "exceeds the number of blocks");
      require(std::find(c.rates.begin(), c.rates.end(), c.plan.rate) !=
                  c.rates.end(),
              "$.plan.rate", "not among the candidate rates");
    }
  }

  if (root.has("finetune")) {
    ObjectReader r(root.at("finetune"), "$.finetune");
    r.read("samples", c.finetune.samples);
    std::string targets = name(c.finetune.targets);
    r.read("targets", targets);
    require(targets == "teacher" || targets == "data", "$.finetune.targets",
            "expected \"teacher\" or \"data\"");
    c.finetune.targets = targets == "teacher" ? FinetuneTargets::kTeacher
                                              : FinetuneTargets::kData;
    read_train(r, c.finetune.train, "$.finetune");
    r.finish();
    require(c.finetune.samples > 0, "$.finetune.samples", "must be > 0");
  }

  root.read("eval_seeds", c.eval_seeds);
  require(c.eval_seeds > 0, "$.eval_seeds", "must be > 0");
  root.read("seed", c.seed);
  std::string out = c.output_dir.string();
  root.read("output_dir", out);
  require(!out.empty(), "$.output_dir", "must not be empty");
  c.output_dir = out;
  root.read("jobs", c.jobs);
  require(c.jobs > 0, "$.jobs", "must be > 0");
  root.finish();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const PipelineConfig& c) {
  const ModelDims& d = c.dims;
  auto train = [](const TrainConfig& t) {
    return json{{"iters", t.iters},
                {"learning_rate", t.learning_rate},
                {"batch", t.batch},
                {"weight_decay", t.weight_decay},
                {"divergence_threshold", t.divergence_threshold}};
  };
  json teacher = train(c.teacher.train);
  teacher["mode"] = name(c.teacher.mode);
  teacher["samples"] = c.teacher.samples;
  json finetune = train(c.finetune.train);
  finetune["samples"] = c.finetune.samples;
  finetune["targets"] = name(c.finetune.targets);
  const DistillConfig& dc = c.distill.config;
  json budget = {{"granularity", c.budget.granularity}};
  json cost_model = json::object();
  if (c.cost_model.tokens) cost_model["tokens"] = *c.cost_model.tokens;
  if (c.cost_model.head_dim) cost_model["head_dim"] = *c.cost_model.head_dim;
  if (c.cost_model.heads) cost_model["heads"] = *c.cost_model.heads;
  if (c.budget.flops) budget["flops"] = *c.budget.flops;
  if (c.budget.fraction) budget["fraction"] = *c.budget.fraction;
  return {
      {"version", kConfigVersion},
      {"dims",
       {{"blocks", d.blocks},
        {"tokens", d.tokens},
        {"width", d.width},
        {"heads", d.heads},
        {"qk_dim", d.qk_dim},
        {"v_dim", d.v_dim},
        {"mlp_hidden", d.mlp_hidden},
        {"timesteps", d.timesteps}}},
      {"teacher", teacher},
      {"feature_map",
       {{"degree", c.feature_map.degree},
        {"slice_width", c.feature_map.slice_width},
        {"depth", c.feature_map.depth},
        {"hidden_width", c.feature_map.hidden_width}}},
      {"rates", c.rates},
      {"distill",
       {{"batch", dc.batch},
        {"update_repeats", dc.update_repeats},
        {"learning_rate", dc.learning_rate},
        {"max_rounds", dc.max_rounds},
        {"tolerance", dc.tolerance},
        {"divergence_threshold", dc.divergence_threshold},
        {"loss", name(dc.loss)},
        {"stabilizer", name(dc.stabilizer)},
        {"train_seeds", c.distill.train_seeds},
        {"heldout_seeds", c.distill.heldout_seeds}}},
      {"budget", budget},
      {"cost_model", cost_model},
      {"plan",
       {{"mode", name(c.plan.mode)},
        {"count", c.plan.count},
        {"rate", c.plan.rate}}},
      {"finetune", finetune},
      {"eval_seeds", c.eval_seeds},
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"jobs", c.jobs}};
}

std::vector<int> parse_rates(const std::string& text) {
  std::vector<int> rates;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int r = 0;
    try {
      r = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size() && !item.empty(), "--rates",
            "'" + item + "' is not an integer");
    rates.push_back(r);
  }
  check_rates(rates, "--rates");
  return rates;
}

BudgetSettings parse_budget(const std::string& text) {
  BudgetSettings b;
  const bool percent = !text.empty() && text.back() == '%';
  const std::string number = percent ? text.substr(0, text.size() - 1) : text;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(number, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == number.size() && !number.empty() && std::isfinite(v) &&
              v > 0.0,
          "--budget", "expected a positive number or percentage, got '" +
                          text + "'");
  if (percent) {
    b.fraction = v / 100.0;
  } else {
    b.flops = v;
  }
  return b;
}

}  // namespace hybridize::cli
