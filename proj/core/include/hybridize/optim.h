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

#ifndef HYBRIDIZE_OPTIM_H_
#define HYBRIDIZE_OPTIM_H_

#include <cstdint>
#include <span>
#include <vector>

namespace hybridize {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

// One decoupled-weight-decay Adam update, in place:
//
//   m = b1 m + (1 - b1) g          v = b2 v + (1 - b2) g^2
//   m_hat = m / (1 - b1^t)         v_hat = v / (1 - b2^t)
//   theta = theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
//
// An empty state is sized on first use. Throws NumericError (leaving theta
// and state untouched) if any gradient entry is non-finite.
void adamw_step(std::span<double> theta, std::span<const double> grad,
                AdamState& state, const AdamWConfig& config);

}  // namespace hybridize

#endif  // HYBRIDIZE_OPTIM_H_
