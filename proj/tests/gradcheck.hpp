// Copyright 2026 The dfx Authors.
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

// Central-difference gradient checking helpers for double-precision tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dfx/core/tensor.hpp"
#include "dfx/nn/param.hpp"

namespace dfx::testing {

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

inline void fill_normal(Tensor<double>& t, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> d(0.0, s);
  for (auto& v : t.storage()) v = d(rng);
}

/// Worst relative error over (up to max_checks) coordinates of values,
/// comparing grads against central differences of loss().
inline double max_grad_error(std::vector<double>& values,
                             const std::vector<double>& grads,
                             const std::function<double()>& loss,
                             double step = 1e-5, std::size_t max_checks = 40,
                             double abs_floor = 1e-7) {
  double worst = 0;
  const std::size_t n = values.size();
  const std::size_t stride = std::max<std::size_t>(1, n / max_checks);
  for (std::size_t i = 0; i < n; i += stride) {
    const double orig = values[i];
    values[i] = orig + step;
    const double lp = loss();
    values[i] = orig - step;
    const double lm = loss();
    values[i] = orig;
    const double num = (lp - lm) / (2 * step);
    if (std::abs(num) < abs_floor && std::abs(grads[i]) < abs_floor) continue;
    worst = std::max(worst, rel_error(grads[i], num));
  }
  return worst;
}

/// Same over every parameter in a list.
inline double max_param_grad_error(const nn::ParamList<double>& params,
                                   const std::function<double()>& loss,
                                   double step = 1e-5, std::size_t per_param = 12) {
  double worst = 0;
  for (auto* p : params) {
    const std::vector<double> g = p->grad.storage();
    worst = std::max(worst, max_grad_error(p->value.storage(), g, loss, step,
                                           per_param));
  }
  return worst;
}

}  // namespace dfx::testing
