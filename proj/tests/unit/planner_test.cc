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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "hybridize/errors.h"
#include "hybridize/planner.h"
#include "hybridize/rng.h"
#include "hybridize/tables.h"
#include "oracle_values.h"

namespace hybridize {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AttentionDims oracle_dims() {
  AttentionDims d;
  d.tokens = 1024;
  d.qk_dim = 64;
  d.v_dim = 64;
  d.heads = 8;
  d.degree = 2;
  d.slice_width = 64;
  d.phi_depth = 2;
  d.phi_hidden = 128;
  return d;
}

ErrorTable errors_of(std::vector<int> rates, std::vector<std::vector<double>> e) {
  ErrorTable t;
  t.rates = std::move(rates);
  t.e = std::move(e);
  return t;
}

CostTable costs_of(std::vector<int> rates, std::vector<std::vector<double>> c) {
  CostTable t;
  t.rates = std::move(rates);
  t.c = std::move(c);
  return t;
}

TEST(Flops, RateOneEqualsSoftmax) {
  for (std::size_t n : {1u, 7u, 64u, 1024u}) {
    AttentionDims d = oracle_dims();
    d.tokens = n;
    EXPECT_EQ(flops_attention(KernelConfig::hybrid(1), d),
              flops_attention(KernelConfig::softmax(), d));
  }
}

TEST(Flops, SoftmaxQuadrupleOnDoubledTokens) {
  AttentionDims d = oracle_dims();
  const double base = flops_attention(KernelConfig::softmax(), d);
  d.tokens *= 2;
  EXPECT_EQ(flops_attention(KernelConfig::softmax(), d), 4.0 * base);
}

TEST(Flops, MatchesOperationCountingOracle) {
  const AttentionDims d = oracle_dims();
  EXPECT_EQ(flops_attention(KernelConfig::softmax(), d), oracle::kFlopsSoftmax[0]);
  EXPECT_EQ(flops_attention(KernelConfig::linear(), d), oracle::kFlopsLinear[0]);
  const int rates[] = {1, 2, 4, 8};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(flops_attention(KernelConfig::hybrid(rates[i]), d), oracle::kFlopsHybrid[i])
        << "rate " << rates[i];
  }
}

TEST(Flops, StabilizerDoesNotChangeCost) {
  const AttentionDims d = oracle_dims();
  EXPECT_EQ(flops_attention(KernelConfig::hybrid(4, Stabilizer::kLiteral), d),
            flops_attention(KernelConfig::hybrid(4, Stabilizer::kConsistent), d));
}

TEST(CostTable, ShapeAndIdenticalRows) {
  const std::vector<int> rates{1, 2, 4, 8};
  const CostTable t = build_cost_table(oracle_dims(), rates, 5);
  ASSERT_EQ(t.blocks(), 5u);
  EXPECT_EQ(t.rates, rates);
  for (const auto& row : t.c) {
    ASSERT_EQ(row.size(), 4u);
    EXPECT_EQ(row, t.c.front());
    for (double c : row) EXPECT_GT(c, 0.0);
  }
  EXPECT_EQ(t.c[0][0], flops_attention(KernelConfig::softmax(), oracle_dims()));
}

TEST(CostTable, StrictlyDecreasingAboveCrossover) {
  const std::vector<int> rates{1, 2, 4, 8};
  AttentionDims d;  // fixture shape: D = M = 8, H = 2, P = 2
  const std::size_t n0 = crossover_tokens(d, rates, 4096);
  ASSERT_GT(n0, 1u);
  for (std::size_t n : {n0, n0 + 1, 2 * n0, std::size_t{4096}}) {
    d.tokens = n;
    const CostTable t = build_cost_table(d, rates, 1);
    for (std::size_t r = 1; r < 4; ++r) EXPECT_LT(t.c[0][r], t.c[0][r - 1]) << "N=" << n;
  }
  d.tokens = n0 - 1;
  const CostTable below = build_cost_table(d, rates, 1);
  bool decreasing = true;
  for (std::size_t r = 1; r < 4; ++r) decreasing &= below.c[0][r] < below.c[0][r - 1];
  EXPECT_FALSE(decreasing);
}

TEST(Mckp, GenerousBudgetKeepsErrorMinimalChoice) {
  const auto e = errors_of({1, 2}, {{1, 2}, {1, 3}});
  const auto c = costs_of({1, 2}, {{4, 2}, {4, 2}});
  const RatePlan p = solve_mckp(e, c, {8.0, 1.0});
  EXPECT_EQ(p.rates, (std::vector<int>{1, 1}));
  EXPECT_EQ(p.objective, 2.0);
  EXPECT_EQ(p.cost, 8.0);
}

TEST(Mckp, MidBudgetConvertsCheaperBlock) {
  const auto e = errors_of({1, 2}, {{1, 2}, {1, 3}});
  const auto c = costs_of({1, 2}, {{4, 2}, {4, 2}});
  const RatePlan p = solve_mckp(e, c, {6.0, 1.0});
  EXPECT_EQ(p.rates, (std::vector<int>{2, 1}));
  EXPECT_EQ(p.objective, 3.0);
  EXPECT_EQ(brute_force_mckp(e, c, {6.0, 1.0}).rates, p.rates);
}

TEST(Mckp, InfeasibleReportsMinimalCost) {
  const auto e = errors_of({1, 2}, {{1, 2}, {1, 3}});
  const auto c = costs_of({1, 2}, {{4, 2}, {4, 2}});
  try {
    solve_mckp(e, c, {3.0, 1.0});
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& err) {
    EXPECT_EQ(err.minimal_cost(), 4.0);
  }
  EXPECT_THROW(brute_force_mckp(e, c, {3.0, 1.0}), InfeasibleError);
}

TEST(Mckp, UnlimitedBudgetTakesPerBlockMinimum) {
  const auto e = errors_of({1, 2, 4}, {{0.3, 0.1, 0.2}, {0.0, 0.5, 0.7}, {0.9, 0.4, 0.4}});
  const auto c = costs_of({1, 2, 4}, {{9, 5, 3}, {9, 5, 3}, {9, 5, 3}});
  const RatePlan p = solve_mckp(e, c, {kInf, 0.0});
  // Tie in block 2 goes to the cheaper rate.
  EXPECT_EQ(p.rates, (std::vector<int>{2, 1, 4}));
  EXPECT_EQ(brute_force_mckp(e, c, {kInf, 0.0}).rates, p.rates);
}

TEST(Mckp, SingleBlockPicksFeasibleMinimum) {
  const auto e = errors_of({1, 2, 4, 8}, {{0.0, 0.2, 0.5, 0.9}});
  const auto c = costs_of({1, 2, 4, 8}, {{10, 7, 5, 4}});
  EXPECT_EQ(brute_force_mckp(e, c, {6.0, 1.0}).rates, (std::vector<int>{4}));
  EXPECT_EQ(solve_mckp(e, c, {6.0, 1.0}).rates, (std::vector<int>{4}));
}

TEST(Mckp, ZeroSoftmaxErrorAndUnlimitedBudgetIsAllSoftmax) {
  const auto e = errors_of({1, 2, 4, 8}, {{0, 1, 2, 3}, {0, 0.5, 0.6, 0.7}});
  const auto c = costs_of({1, 2, 4, 8}, {{8, 6, 5, 4}, {8, 6, 5, 4}});
  const RatePlan p = solve_mckp(e, c, {kInf, 0.0});
  EXPECT_EQ(p.rates, (std::vector<int>{1, 1}));
  EXPECT_EQ(p.objective, 0.0);
}

struct RandomInstance {
  ErrorTable e;
  CostTable c;
};

RandomInstance random_instance(SeededRng& rng, std::size_t blocks) {
  const std::vector<int> rates{1, 2, 4, 8};
  RandomInstance inst{errors_of(rates, {}), costs_of(rates, {})};
  for (std::size_t i = 0; i < blocks; ++i) {
    std::vector<double> e(4), c(4);
    for (std::size_t r = 0; r < 4; ++r) {
      // Coarse error grid so exact ties happen.
      e[r] = r == 0 ? 0.0 : static_cast<double>(rng.below(6)) * 0.125;
      c[r] = static_cast<double>(1 + rng.below(20));
    }
    inst.e.e.push_back(e);
    inst.c.c.push_back(c);
  }
  return inst;
}

TEST(Mckp, MatchesBruteForceOnRandomInstances) {
  SeededRng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t blocks = 1 + rng.below(6);
    const RandomInstance inst = random_instance(rng, blocks);
    double lo = 0, hi = 0;
    for (const auto& row : inst.c.c) {
      lo += *std::min_element(row.begin(), row.end());
      hi += *std::max_element(row.begin(), row.end());
    }
    const double beta = std::floor(lo + (hi - lo) * rng.uniform());
    const Budget b{beta, 1.0};
    const RatePlan dp = solve_mckp(inst.e, inst.c, b);
    const RatePlan bf = brute_force_mckp(inst.e, inst.c, b);
    EXPECT_EQ(dp.objective, bf.objective);
    EXPECT_EQ(dp.rates, bf.rates);
    EXPECT_LE(dp.cost, beta);
    EXPECT_EQ(dp.rates.size(), blocks);
  }
}

TEST(Mckp, BudgetMonotonicity) {
  SeededRng rng(78);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomInstance inst = random_instance(rng, 5);
    double lo = 0;
    for (const auto& row : inst.c.c) lo += *std::min_element(row.begin(), row.end());
    double previous = kInf;
    for (double beta = lo; beta <= lo + 60; beta += 3) {
      const double obj = solve_mckp(inst.e, inst.c, {beta, 1.0}).objective;
      EXPECT_LE(obj, previous);
      previous = obj;
    }
  }
}

TEST(Mckp, CoarseGranularityStaysWithinBudget) {
  SeededRng rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomInstance inst = random_instance(rng, 6);
    double hi = 0;
    for (const auto& row : inst.c.c) hi += *std::max_element(row.begin(), row.end());
    const double beta = 0.8 * hi;
    try {
      const RatePlan p = solve_mckp(inst.e, inst.c, {beta, 3.7});
      EXPECT_LE(p.cost, beta);
    } catch (const InfeasibleError&) {
      // Rounding costs up can only lose feasibility, never gain it.
    }
    const RatePlan d = solve_mckp(inst.e, inst.c, {beta, 0.0});
    EXPECT_LE(d.cost, beta);
  }
}

TEST(Mckp, RejectsBadInputs) {
  const auto e = errors_of({1, 2}, {{0, 1}});
  const auto c = costs_of({1, 2}, {{2, 1}, {2, 1}});
  EXPECT_THROW(solve_mckp(e, c, {10.0, 1.0}), DimensionError);
  const auto c2 = costs_of({1, 4}, {{2, 1}});
  EXPECT_THROW(solve_mckp(e, c2, {10.0, 1.0}), DimensionError);
  const auto c3 = costs_of({1, 2}, {{2, 1}});
  EXPECT_THROW(solve_mckp(e, c3, {-1.0, 1.0}), ArgumentError);
  SeededRng rng(1);
  const RandomInstance big = random_instance(rng, 13);
  EXPECT_THROW(brute_force_mckp(big.e, big.c, {1000.0, 1.0}), ArgumentError);
  EXPECT_NO_THROW(solve_mckp(big.e, big.c, {1000.0, 1.0}));
}

TEST(Homogeneous, AllBlocksWhenCountIsB) {
  const auto e = errors_of({1, 4}, {{0, 0.3}, {0, 0.1}, {0, 0.2}});
  const auto c = costs_of({1, 4}, {{4, 1}, {4, 1}, {4, 1}});
  EXPECT_EQ(homogeneous_select(e, c, 4, 3).rates, (std::vector<int>{4, 4, 4}));
}

TEST(Homogeneous, SelectsSmallestErrorsLikeSorting) {
  SeededRng rng(80);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t blocks = 8;
    ErrorTable e = errors_of({1, 2}, {});
    CostTable c = costs_of({1, 2}, {});
    std::vector<double> col(blocks);
    for (std::size_t i = 0; i < blocks; ++i) {
      col[i] = rng.uniform();
      e.e.push_back({0.0, col[i]});
      c.c.push_back({2.0, 1.0});
    }
    const std::size_t k = 1 + rng.below(blocks);
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    const RatePlan p = homogeneous_select(e, c, 2, k);
    for (std::size_t i = 0; i < blocks; ++i) {
      EXPECT_EQ(p.rates[i] == 2, col[i] <= sorted[k - 1]);
    }
  }
}

TEST(Homogeneous, TiesGoToLowerIndex) {
  const auto e = errors_of({1, 2}, {{0, 0.5}, {0, 0.2}, {0, 0.2}, {0, 0.1}});
  const auto c = costs_of({1, 2}, {{2, 1}, {2, 1}, {2, 1}, {2, 1}});
  EXPECT_EQ(homogeneous_select(e, c, 2, 2).rates, (std::vector<int>{1, 2, 1, 2}));
  EXPECT_THROW(homogeneous_select(e, c, 2, 0), ArgumentError);
  EXPECT_THROW(homogeneous_select(e, c, 2, 5), ArgumentError);
  EXPECT_THROW(homogeneous_select(e, c, 3, 1), ArgumentError);
}

AttentionDims video_dims() {
  AttentionDims d;
  d.tokens = 32768;
  d.qk_dim = 128;
  d.v_dim = 128;
  d.heads = 12;
  return d;
}

std::vector<int> grid_plan(std::size_t converted, int rate) {
  std::vector<int> plan(30, 1);
  std::fill(plan.begin(), plan.begin() + converted, rate);
  return plan;
}

TEST(Reduction, AllSoftmaxIsZero) {
  const ReductionReport r = reduction_report(std::vector<int>(30, 1), video_dims());
  EXPECT_EQ(r.reduction_pct, 0.0);
  EXPECT_EQ(r.asymptotic_reduction_pct, 0.0);
  EXPECT_EQ(r.total_flops, r.baseline_flops);
}

TEST(Reduction, AsymptoticClosedForms) {
  EXPECT_NEAR(reduction_report(grid_plan(15, 4), video_dims()).asymptotic_reduction_pct,
              37.5, 1e-12);
  EXPECT_NEAR(reduction_report(grid_plan(25, 8), video_dims()).asymptotic_reduction_pct,
              100.0 * 25.0 / 30.0 * 7.0 / 8.0, 1e-12);
}

TEST(Reduction, PositiveAboveCrossover) {
  AttentionDims d;
  const std::vector<int> rates{1, 2, 4, 8};
  d.tokens = crossover_tokens(d, rates, 4096);
  for (int r : {2, 4, 8}) {
    EXPECT_GT(reduction_report(std::vector<int>{1, r, 1}, d).reduction_pct, 0.0);
  }
}

TEST(Reduction, CsvRowFormat) {
  ReductionReport r;
  r.total_flops = 750;
  r.baseline_flops = 1000;
  r.reduction_pct = 25;
  r.asymptotic_reduction_pct = 30;
  EXPECT_EQ(std::string(kReductionCsvHeader),
            "config,total_flops,baseline_flops,reduction_pct,asymptotic_reduction_pct");
  EXPECT_EQ(reduction_csv_row("x", r), "x,750,1000,25.000000,30.000000");
}

TEST(Tables, JsonRoundTripWithInfinity) {
  ErrorTable e = errors_of({1, 2}, {{0.0, 0.25}, {0.0, kInf}});
  e.validation_seed = 99;
  e.sample_count = 8;
  const ErrorTable back = error_table_from_json(to_json(e));
  EXPECT_TRUE(to_json(e)["e"][1][1].is_null());
  EXPECT_EQ(back.rates, e.rates);
  EXPECT_EQ(back.e[0], e.e[0]);
  EXPECT_TRUE(std::isinf(back.e[1][1]));
  EXPECT_EQ(back.validation_seed, 99u);

  const CostTable c = build_cost_table(oracle_dims(), std::vector<int>{1, 2}, 2);
  const CostTable cb = cost_table_from_json(to_json(c));
  EXPECT_EQ(cb.c, c.c);
  EXPECT_EQ(to_json(cb.dims), to_json(c.dims));

  RatePlan p;
  p.rates = {1, 2};
  p.objective = 0.25;
  p.cost = 10;
  p.budget = kInf;
  const RatePlan pb = rate_plan_from_json(to_json(p));
  EXPECT_EQ(pb.rates, p.rates);
  EXPECT_TRUE(std::isinf(pb.budget));
}

TEST(Tables, RateIndexLookup) {
  EXPECT_EQ(rate_index({1, 2, 4}, 4), 2u);
  EXPECT_THROW(rate_index({1, 2, 4}, 3), ArgumentError);
}

}  // namespace
}  // namespace hybridize
