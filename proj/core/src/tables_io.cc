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

#include "hybridize/tables.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hybridize/errors.h"

namespace hybridize {
namespace {

using nlohmann::json;

json number_or_null(double x) {
  return std::isfinite(x) ? json(x) : json(nullptr);
}

double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity()
                     : j.get<double>();
}

json matrix_json(const std::vector<std::vector<double>>& m) {
  json rows = json::array();
  for (const auto& r : m) {
    json row = json::array();
    for (double x : r) row.push_back(number_or_null(x));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::vector<double>> matrix_from_json(const json& j,
                                                  std::size_t cols) {
  std::vector<std::vector<double>> m;
  for (const auto& row : j) {
    if (row.size() != cols) {
      throw ConfigError("table row has " + std::to_string(row.size()) +
                        " entries, expected " + std::to_string(cols));
    }
    std::vector<double> r;
    for (const auto& x : row) r.push_back(number_or_inf(x));
    m.push_back(std::move(r));
  }
  return m;
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::size_t rate_index(const std::vector<int>& rates, int rate) {
  const auto it = std::find(rates.begin(), rates.end(), rate);
  if (it == rates.end()) {
    throw ArgumentError("rate " + std::to_string(rate) +
                        " is not among the candidate rates");
  }
  return static_cast<std::size_t>(it - rates.begin());
}

json to_json(const AttentionDims& d) {
  return {{"tokens", d.tokens},       {"qk_dim", d.qk_dim},
          {"v_dim", d.v_dim},         {"heads", d.heads},
          {"degree", d.degree},       {"slice_width", d.resolved_slice_width()},
          {"phi_depth", d.phi_depth}, {"phi_hidden", d.resolved_phi_hidden()}};
}

AttentionDims attention_dims_from_json(const json& j) {
  return guarded("attention dims", [&] {
    AttentionDims d;
    d.tokens = j.at("tokens").get<std::size_t>();
    d.qk_dim = j.at("qk_dim").get<std::size_t>();
    d.v_dim = j.at("v_dim").get<std::size_t>();
    d.heads = j.at("heads").get<std::size_t>();
    d.degree = j.at("degree").get<int>();
    d.slice_width = j.at("slice_width").get<std::size_t>();
    d.phi_depth = j.at("phi_depth").get<int>();
    d.phi_hidden = j.at("phi_hidden").get<std::size_t>();
    return d;
  });
}

json to_json(const ErrorTable& t) {
  return {{"kind", "error_table"},
          {"rates", t.rates},
          {"blocks", t.blocks()},
          {"e", matrix_json(t.e)},
          {"metadata",
           {{"validation_seed", t.validation_seed},
            {"sample_count", t.sample_count},
            {"metric", "heldout_value_distill_l1"}}}};
}

ErrorTable error_table_from_json(const json& j) {
  return guarded("error table", [&] {
    ErrorTable t;
    t.rates = j.at("rates").get<std::vector<int>>();
    t.e = matrix_from_json(j.at("e"), t.rates.size());
    if (t.e.size() != j.at("blocks").get<std::size_t>()) {
      throw ConfigError("error table: block count does not match rows");
    }
    const auto& meta = j.at("metadata");
    t.validation_seed = meta.at("validation_seed").get<std::uint64_t>();
    t.sample_count = meta.at("sample_count").get<std::size_t>();
    return t;
  });
}

json to_json(const CostTable& t) {
  return {{"kind", "cost_table"},
          {"rates", t.rates},
          {"blocks", t.blocks()},
          {"c", matrix_json(t.c)},
          {"dims", to_json(t.dims)}};
}

CostTable cost_table_from_json(const json& j) {
  return guarded("cost table", [&] {
    CostTable t;
    t.rates = j.at("rates").get<std::vector<int>>();
    t.c = matrix_from_json(j.at("c"), t.rates.size());
    t.dims = attention_dims_from_json(j.at("dims"));
    return t;
  });
}

json to_json(const RatePlan& p) {
  return {{"kind", "rate_plan"},
          {"rates", p.rates},
          {"objective", number_or_null(p.objective)},
          {"cost", number_or_null(p.cost)},
          {"budget", number_or_null(p.budget)}};
}

RatePlan rate_plan_from_json(const json& j) {
  return guarded("rate plan", [&] {
    RatePlan p;
    p.rates = j.at("rates").get<std::vector<int>>();
    p.objective = number_or_inf(j.at("objective"));
    p.cost = number_or_inf(j.at("cost"));
    p.budget = number_or_inf(j.at("budget"));
    return p;
  });
}

}  // namespace hybridize
