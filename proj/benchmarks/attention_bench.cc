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

#include <benchmark/benchmark.h>

#include "hybridize/attention.h"
#include "hybridize/feature_map.h"
#include "hybridize/numerics.h"
#include "hybridize/tensor.h"

namespace hybridize {
namespace {

constexpr std::size_t kWidth = 32;

struct Inputs {
  Tensor q, k, v;
  FeatureMap phi_q, phi_k;
};

Inputs make_inputs(std::size_t n) {
  SeededRng rng(1);
  Inputs in{gaussian(rng, {n, kWidth}), gaussian(rng, {n, kWidth}),
            gaussian(rng, {n, kWidth}), {}, {}};
  FeatureMapSpec spec;
  spec.input_dim = kWidth;
  in.phi_q = make_feature_map(spec, rng);
  in.phi_k = make_feature_map(spec, rng);
  return in;
}

void BM_SoftmaxHead(benchmark::State& state) {
  const ScopedCheckedMode unchecked(false);
  const Inputs in = make_inputs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(softmax_head(in.q, in.k, in.v));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SoftmaxHead)->RangeMultiplier(2)->Range(128, 2048)->Complexity();

void BM_LinearHead(benchmark::State& state) {
  const ScopedCheckedMode unchecked(false);
  const Inputs in = make_inputs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(linear_head(in.q, in.k, in.v, in.phi_q, in.phi_k));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LinearHead)->RangeMultiplier(2)->Range(128, 2048)->Complexity();

// args: tokens, rate
void BM_HybridHead(benchmark::State& state) {
  const ScopedCheckedMode unchecked(false);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Inputs in = make_inputs(n);
  const TokenPartition part = partition_tokens(n, static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        hybrid_head(in.q, in.k, in.v, in.phi_q, in.phi_k, part, Stabilizer::kLiteral));
  }
}
BENCHMARK(BM_HybridHead)->ArgsProduct({{512, 2048}, {2, 4, 8}});

void BM_FeatureMap(benchmark::State& state) {
  const ScopedCheckedMode unchecked(false);
  const Inputs in = make_inputs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(apply_feature_map(in.phi_q, in.q));
}
BENCHMARK(BM_FeatureMap)->Arg(512)->Arg(2048);

}  // namespace
}  // namespace hybridize

BENCHMARK_MAIN();
