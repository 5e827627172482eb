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

#include "hybridize/planner.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>

#include "hybridize/errors.h"

namespace hybridize {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDefaultUnits = 1e6;

void check_dims(const AttentionDims& d) {
  if (d.tokens == 0 || d.qk_dim == 0 || d.v_dim == 0 || d.heads == 0 ||
      d.degree < 1 || d.phi_depth < 1) {
    throw ArgumentError("attention dims must be positive");
  }
}

void check_tables(const ErrorTable& e, const CostTable& c) {
  if (e.rates != c.rates) {
    throw DimensionError("error and cost tables use different rate sets");
  }
  if (e.blocks() != c.blocks() || e.blocks() == 0) {
    throw DimensionError("error and cost tables have different block counts");
  }
  for (std::size_t i = 0; i < e.blocks(); ++i) {
    if (e.e[i].size() != e.rates.size() || c.c[i].size() != c.rates.size()) {
      throw DimensionError("ragged error/cost table row " + std::to_string(i));
    }
  }
}

// Summation order shared by the DP and the brute force so equal
// assignments produce bit-identical objectives: last block first.
double right_fold(const std::vector<std::vector<double>>& table,
                  const std::vector<std::size_t>& choice) {
  double total = 0.0;
  for (std::size_t i = choice.size(); i-- > 0;) {
    total = table[i][choice[i]] + total;
  }
  return total;
}

RatePlan make_plan(const ErrorTable& e, const CostTable& c,
                   const std::vector<std::size_t>& choice, double beta) {
  RatePlan plan;
  for (std::size_t r : choice) plan.rates.push_back(e.rates[r]);
  plan.objective = right_fold(e.e, choice);
  plan.cost = right_fold(c.c, choice);
  plan.budget = beta;
  return plan;
}

double minimal_cost(const CostTable& c) {
  double total = 0.0;
  for (const auto& row : c.c) total += *std::min_element(row.begin(), row.end());
  return total;
}

[[noreturn]] void throw_infeasible(const CostTable& c, double beta) {
  const double cheapest = minimal_cost(c);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "budget %.6g FLOPs is infeasible; the cheapest plan costs "
                "%.6g FLOPs",
                beta, cheapest);
  throw InfeasibleError(buf, cheapest);
}

struct Discretized {
  std::vector<std::vector<std::int64_t>> units;
  std::int64_t capacity = 0;
};

Discretized discretize(const CostTable& c, const Budget& budget) {
  const double g =
      budget.granularity > 0.0 ? budget.granularity : budget.beta / kDefaultUnits;
  if (!(g > 0.0) || !std::isfinite(g)) {
    throw ArgumentError("budget granularity must be positive and finite");
  }
  Discretized d;
  for (const auto& row : c.c) {
    std::vector<std::int64_t> u;
    for (double x : row) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw ArgumentError("costs must be finite and non-negative");
      }
      u.push_back(static_cast<std::int64_t>(std::ceil(x / g)));
    }
    d.units.push_back(std::move(u));
  }
  d.capacity = static_cast<std::int64_t>(std::floor(budget.beta / g));
  return d;
}

// Unconstrained optimum: per block minimize (e, c, rate index).
std::vector<std::size_t> unconstrained_choice(const ErrorTable& e,
                                              const CostTable& c) {
  std::vector<std::size_t> choice(e.blocks(), 0);
  for (std::size_t i = 0; i < e.blocks(); ++i) {
    for (std::size_t r = 1; r < e.rates.size(); ++r) {
      const std::size_t b = choice[i];
      if (e.e[i][r] < e.e[i][b] ||
          (e.e[i][r] == e.e[i][b] && c.c[i][r] < c.c[i][b])) {
        choice[i] = r;
      }
    }
  }
  return choice;
}

void check_budget(const Budget& budget) {
  if (!(budget.beta > 0.0)) throw ArgumentError("budget must be positive");
  if (budget.granularity < 0.0) {
    throw ArgumentError("budget granularity must be positive");
  }
}

}  // namespace

double feature_map_flops(const AttentionDims& d) {
  check_dims(d);
  const double e = static_cast<double>(d.feature_dim());
  const double hidden = static_cast<double>(d.resolved_phi_hidden());
  double in = static_cast<double>(d.qk_dim);
  double total = 0.0;
  for (int l = 0; l < d.phi_depth; ++l) {
    const bool last = l + 1 == d.phi_depth;
    const double out = last ? e : hidden;
    total += 2.0 * in * out;
    if (!last) total += out;  // SiLU
    in = out;
  }
  return total + e /* softplus */ + e /* powers */;
}

double flops_attention(const KernelConfig& kernel, const AttentionDims& d) {
  check_dims(d);
  const double n = static_cast<double>(d.tokens);
  const double dq = static_cast<double>(d.qk_dim);
  const double m = static_cast<double>(d.v_dim);
  const double e = static_cast<double>(d.feature_dim());
  const double heads = static_cast<double>(d.heads);

  auto softmax_part = [&](double keys) {
    return 2.0 * n * keys * dq + kSoftmaxOpsPerScore * n * keys +
           2.0 * n * keys * m;
  };
  auto per_query = [&] { return 2.0 * n * e * m + 2.0 * n * e + 2.0 * n * m; };

  switch (kernel.kind) {
    case AttentionKind::kSoftmax:
      return heads * softmax_part(n);
    case AttentionKind::kLinear: {
      const double c = feature_map_flops(d);
      return heads *
             (2.0 * n * c + 2.0 * n * e * m + n * e + per_query());
    }
    case AttentionKind::kHybrid: {
      if (kernel.rate < 1) throw ArgumentError("hybrid rate must be >= 1");
      if (kernel.rate == 1) return heads * softmax_part(n);
      const auto r = static_cast<std::size_t>(kernel.rate);
      const double s = static_cast<double>((d.tokens + r - 1) / r);
      const double l = n - s;
      const double c = feature_map_flops(d);
      return heads * (softmax_part(s) + (n + l) * c + 2.0 * l * e * m + l * e +
                      per_query());
    }
  }
  throw ArgumentError("unknown attention kind");
}

CostTable build_cost_table(const AttentionDims& dims,
                           std::span<const int> rates, std::size_t blocks) {
  if (rates.empty()) throw ArgumentError("no candidate rates");
  CostTable t;
  t.rates.assign(rates.begin(), rates.end());
  t.dims = dims;
  std::vector<double> row;
  for (int r : rates) row.push_back(flops_attention(KernelConfig::hybrid(r), dims));
  t.c.assign(blocks, row);
  return t;
}

std::size_t crossover_tokens(AttentionDims dims, std::span<const int> rates,
                             std::size_t scan_limit) {
  std::vector<int> sorted(rates.begin(), rates.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t last_bad = 0;
  for (std::size_t n = 1; n <= scan_limit; ++n) {
    dims.tokens = n;
    double prev = kInf;
    bool ok = true;
    for (int r : sorted) {
      const double c = flops_attention(KernelConfig::hybrid(r), dims);
      if (!(c < prev)) ok = false;
      prev = c;
    }
    if (!ok) last_bad = n;
  }
  return last_bad == scan_limit ? 0 : last_bad + 1;
}

RatePlan solve_mckp(const ErrorTable& errors, const CostTable& costs,
                    const Budget& budget) {
  check_tables(errors, costs);
  check_budget(budget);
  const std::size_t blocks = errors.blocks();
  const std::size_t nr = errors.rates.size();
  if (std::isinf(budget.beta)) {
    return make_plan(errors, costs, unconstrained_choice(errors, costs),
                     budget.beta);
  }
  const Discretized d = discretize(costs, budget);
  std::int64_t min_units = 0, max_units = 0;
  for (const auto& u : d.units) {
    min_units += *std::min_element(u.begin(), u.end());
    max_units += *std::max_element(u.begin(), u.end());
  }
  if (min_units > d.capacity) throw_infeasible(costs, budget.beta);
  const auto cap = static_cast<std::size_t>(std::min(d.capacity, max_units));

  // Suffix DP over exact unit totals: best[w] is the minimal error of blocks
  // i..B-1 using exactly w units; choice[i][w] the first rate index that
  // attains it.
  std::vector<double> next(cap + 1, kInf), best(cap + 1, kInf);
  next[0] = 0.0;
  std::vector<std::vector<std::uint8_t>> choice(
      blocks, std::vector<std::uint8_t>(cap + 1, 0));
  for (std::size_t i = blocks; i-- > 0;) {
    std::fill(best.begin(), best.end(), kInf);
    for (std::size_t w = 0; w <= cap; ++w) {
      for (std::size_t r = 0; r < nr; ++r) {
        const auto u = static_cast<std::size_t>(d.units[i][r]);
        if (u > w || next[w - u] == kInf) continue;
        const double v = errors.e[i][r] + next[w - u];
        if (v < best[w]) {
          best[w] = v;
          choice[i][w] = static_cast<std::uint8_t>(r);
        }
      }
    }
    std::swap(best, next);
  }
  std::size_t target = 0;
  bool found = false;
  for (std::size_t w = 0; w <= cap; ++w) {
    if (next[w] == kInf) continue;
    if (!found || next[w] < next[target]) {
      target = w;
      found = true;
    }
  }
  if (!found) throw_infeasible(costs, budget.beta);
  std::vector<std::size_t> picked(blocks);
  std::size_t w = target;
  for (std::size_t i = 0; i < blocks; ++i) {
    picked[i] = choice[i][w];
    w -= static_cast<std::size_t>(d.units[i][picked[i]]);
  }
  return make_plan(errors, costs, picked, budget.beta);
}

RatePlan brute_force_mckp(const ErrorTable& errors, const CostTable& costs,
                          const Budget& budget) {
  check_tables(errors, costs);
  check_budget(budget);
  const std::size_t blocks = errors.blocks();
  if (blocks > kBruteForceMaxBlocks) {
    throw ArgumentError("brute_force_mckp: " + std::to_string(blocks) +
                        " blocks exceeds the enumeration limit of " +
                        std::to_string(kBruteForceMaxBlocks));
  }
  const std::size_t nr = errors.rates.size();
  const bool unconstrained = std::isinf(budget.beta);
  Discretized d;
  if (!unconstrained) d = discretize(costs, budget);

  std::vector<std::size_t> idx(blocks, 0), best_idx;
  double best_obj = kInf, best_cost = kInf;
  bool found = false;
  while (true) {
    // Cost key: discretized units when budgeted, raw FLOPs otherwise.
    double cost_key = 0.0;
    bool fits = true;
    if (unconstrained) {
      cost_key = right_fold(costs.c, idx);
    } else {
      std::int64_t units = 0;
      for (std::size_t i = 0; i < blocks; ++i) units += d.units[i][idx[i]];
      fits = units <= d.capacity;
      cost_key = static_cast<double>(units);
    }
    if (fits) {
      const double obj = right_fold(errors.e, idx);
      // Enumeration is lexicographic, so strict comparison keeps the
      // smallest index vector among exact ties.
      if (!found || obj < best_obj ||
          (obj == best_obj && cost_key < best_cost)) {
        best_obj = obj;
        best_cost = cost_key;
        best_idx = idx;
        found = true;
      }
    }
    std::size_t pos = blocks;
    while (pos-- > 0) {
      if (++idx[pos] < nr) break;
      idx[pos] = 0;
    }
    if (pos == static_cast<std::size_t>(-1)) break;
  }
  if (!found) throw_infeasible(costs, budget.beta);
  return make_plan(errors, costs, best_idx, budget.beta);
}

RatePlan homogeneous_select(const ErrorTable& errors, const CostTable& costs,
                            int rate, std::size_t count) {
  check_tables(errors, costs);
  const std::size_t blocks = errors.blocks();
  if (count < 1 || count > blocks) {
    throw ArgumentError("homogeneous_select: count must be in [1, " +
                        std::to_string(blocks) + "]");
  }
  const std::size_t col = rate_index(errors.rates, rate);
  const std::size_t base = rate_index(errors.rates, 1);
  std::vector<std::size_t> order(blocks);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return errors.e[a][col] < errors.e[b][col];
  });
  std::vector<std::size_t> choice(blocks, base);
  for (std::size_t k = 0; k < count; ++k) choice[order[k]] = col;
  return make_plan(errors, costs, choice, kInf);
}

ReductionReport reduction_report(std::span<const int> plan_rates,
                                 const AttentionDims& dims) {
  if (plan_rates.empty()) throw ArgumentError("reduction_report: empty plan");
  ReductionReport rep;
  const double softmax = flops_attention(KernelConfig::softmax(), dims);
  double quad = 0.0;
  for (int r : plan_rates) {
    rep.total_flops += flops_attention(KernelConfig::hybrid(r), dims);
    rep.baseline_flops += softmax;
    quad += 1.0 - 1.0 / static_cast<double>(r);
  }
  rep.reduction_pct = 100.0 * (1.0 - rep.total_flops / rep.baseline_flops);
  rep.asymptotic_reduction_pct =
      100.0 * quad / static_cast<double>(plan_rates.size());
  return rep;
}

ReductionReport reduction_report(const RatePlan& plan,
                                 const AttentionDims& dims) {
  return reduction_report(std::span<const int>(plan.rates), dims);
}

std::string reduction_csv_row(const std::string& config,
                              const ReductionReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.6f,%.6f", config.c_str(),
                report.total_flops, report.baseline_flops, report.reduction_pct,
                report.asymptotic_reduction_pct);
  return buf;
}

}  // namespace hybridize
