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

#ifndef HYBRIDIZE_PLANNER_H_
#define HYBRIDIZE_PLANNER_H_

#include <span>
#include <string>
#include <vector>

#include "hybridize/attention.h"
#include "hybridize/tables.h"

namespace hybridize {

// FLOP conventions, per head:
//   * a multiply-add counts 2 (dot products, matmuls, dense layers incl. bias)
//   * one stabilized softmax score costs kSoftmaxOpsPerScore (max, subtract,
//     exp, sum, divide)
//   * one activation (SiLU, softplus) or one power costs 1
inline constexpr double kSoftmaxOpsPerScore = 5.0;

// FLOPs to push one token through one feature map:
//   sum over layers of 2 in out  +  hidden activations  +  E softplus
//   +  E powers                                       (E = P D')
double feature_map_flops(const AttentionDims& dims);

// Closed forms, summed over heads. With S = ceil(N / R), L = N - S,
// E = P D', C = feature_map_flops:
//
//   softmax     2N^2 D + 5N^2 + 2N^2 M
//   linear      2N C + 2N E M + N E + 2N E M + 2N E + 2N M
//   hybrid(R)   2NSD + 5NS + 2NSM               softmax tokens
//               + (N + L) C                     phi on queries and T_L keys
//               + 2L E M + L E                  aggregates over T_L
//               + 2N E M + 2N E + 2N M          per-query products
//   hybrid(1)   identical to softmax (no feature-map terms)
double flops_attention(const KernelConfig& kernel, const AttentionDims& dims);

// c[i][r] = flops_attention(hybrid(r)); rows identical, kept per block.
CostTable build_cost_table(const AttentionDims& dims,
                           std::span<const int> rates, std::size_t blocks);

// Smallest N0 such that cost is strictly decreasing along ascending `rates`
// for every N in [N0, scan_limit]. Returns 0 if no such N0 exists.
std::size_t crossover_tokens(AttentionDims dims, std::span<const int> rates,
                             std::size_t scan_limit = 1 << 16);

struct Budget {
  double beta = 0.0;         // FLOPs; +inf for unconstrained
  double granularity = 0.0;  // FLOPs per DP unit; 0 selects beta / 1e6
};

// Multiple-choice knapsack: exactly one rate per block, minimal sum of e,
// discretized cost sum(ceil(c / g)) <= floor(beta / g). Among optimal
// assignments prefers lower discretized cost, then the lexicographically
// smallest vector of rate indices. Throws InfeasibleError (carrying the
// cheapest achievable cost) when nothing fits.
RatePlan solve_mckp(const ErrorTable& errors, const CostTable& costs,
                    const Budget& budget);

// Exhaustive reference with identical discretization and tie-breaking.
// Refuses (ArgumentError) more than kBruteForceMaxBlocks blocks.
inline constexpr std::size_t kBruteForceMaxBlocks = 12;
RatePlan brute_force_mckp(const ErrorTable& errors, const CostTable& costs,
                          const Budget& budget);

// Converts the `count` blocks with the smallest e at `rate` (ties to the
// lower block index) and leaves the rest at rate 1.
RatePlan homogeneous_select(const ErrorTable& errors, const CostTable& costs,
                            int rate, std::size_t count);

struct ReductionReport {
  double total_flops = 0.0;
  double baseline_flops = 0.0;
  double reduction_pct = 0.0;
  // N -> infinity limit for the quadratic terms: 100/B sum(1 - 1/r_i).
  double asymptotic_reduction_pct = 0.0;
};

ReductionReport reduction_report(std::span<const int> plan_rates,
                                 const AttentionDims& dims);
ReductionReport reduction_report(const RatePlan& plan,
                                 const AttentionDims& dims);

// "config,total_flops,baseline_flops,reduction_pct"
inline constexpr const char* kReductionCsvHeader =
    "config,total_flops,baseline_flops,reduction_pct,asymptotic_reduction_pct";
std::string reduction_csv_row(const std::string& config,
                              const ReductionReport& report);

}  // namespace hybridize

#endif  // HYBRIDIZE_PLANNER_H_
