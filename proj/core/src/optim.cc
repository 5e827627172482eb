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

#include "hybridize/optim.h"

#include <cmath>

#include "hybridize/errors.h"

namespace hybridize {

void adamw_step(std::span<double> theta, std::span<const double> grad,
                AdamState& state, const AdamWConfig& config) {
  if (theta.size() != grad.size()) {
    throw DimensionError("adamw_step: parameter/gradient size mismatch");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw NumericError("adamw_step: non-finite gradient, step rejected");
    }
  }
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(theta.size(), 0.0);
    state.second_moment.assign(theta.size(), 0.0);
  }
  if (state.first_moment.size() != theta.size() ||
      state.second_moment.size() != theta.size()) {
    throw DimensionError("adamw_step: optimizer state size mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - config.learning_rate * config.weight_decay;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * grad[i];
    v = config.beta2 * v + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    theta[i] = theta[i] * decay -
               config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

}  // namespace hybridize
