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

#ifndef HYBRIDIZE_TABLES_H_
#define HYBRIDIZE_TABLES_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hybridize {

// Attention shape used by the cost model.
struct AttentionDims {
  std::size_t tokens = 64;  // N
  std::size_t qk_dim = 8;   // D
  std::size_t v_dim = 8;    // M
  std::size_t heads = 2;    // H
  int degree = 2;           // P
  std::size_t slice_width = 0;  // D', zero means D
  int phi_depth = 2;
  std::size_t phi_hidden = 0;   // zero means P * D'

  std::size_t resolved_slice_width() const {
    return slice_width ? slice_width : qk_dim;
  }
  std::size_t feature_dim() const {
    return static_cast<std::size_t>(degree) * resolved_slice_width();
  }
  std::size_t resolved_phi_hidden() const {
    return phi_hidden ? phi_hidden : feature_dim();
  }
};

// Held-out distillation error e[block][rate index] (L_vd, >= 0). +inf marks
// a diverged (block, rate) job.
struct ErrorTable {
  std::vector<int> rates;
  std::vector<std::vector<double>> e;
  std::uint64_t validation_seed = 0;
  std::size_t sample_count = 0;

  std::size_t blocks() const { return e.size(); }
};

// FLOPs c[block][rate index].
struct CostTable {
  std::vector<int> rates;
  std::vector<std::vector<double>> c;
  AttentionDims dims;

  std::size_t blocks() const { return c.size(); }
};

// One rate per block.
struct RatePlan {
  std::vector<int> rates;
  double objective = 0.0;  // sum of e over the chosen entries
  double cost = 0.0;       // sum of c over the chosen entries
  double budget = 0.0;     // +inf when unconstrained
};

// Structured-text forms. Non-finite numbers are written as null.
nlohmann::json to_json(const AttentionDims& dims);
AttentionDims attention_dims_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ErrorTable& table);
ErrorTable error_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CostTable& table);
CostTable cost_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RatePlan& plan);
RatePlan rate_plan_from_json(const nlohmann::json& j);

// Index of `rate` in `rates`; throws ArgumentError if absent.
std::size_t rate_index(const std::vector<int>& rates, int rate);

}  // namespace hybridize

#endif  // HYBRIDIZE_TABLES_H_
