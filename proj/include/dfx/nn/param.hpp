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

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dfx/core/hash.hpp"
#include "dfx/core/rng.hpp"
#include "dfx/core/tensor.hpp"

namespace dfx::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, int rows, int cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.zero(); }
  void fill_normal(Rng& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : value.storage()) v = static_cast<T>(dist(rng));
  }
};

template <typename T>
using ParamList = std::vector<Param<T>*>;

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (auto* p : params) p->zero_grad();
}

/// FNV-1a over names, shapes and raw value bytes, in list order.
template <typename T>
std::uint64_t checksum(const ParamList<T>& params) {
  Fnv1a h;
  for (const auto* p : params) {
    h.update(p->name);
    const int shape[2] = {p->value.rows(), p->value.cols()};
    h.update(shape, sizeof(shape));
    h.update(p->value.data(), p->value.size() * sizeof(T));
  }
  return h.digest();
}

template <typename T>
double grad_norm(const ParamList<T>& params) {
  double s = 0;
  for (const auto* p : params)
    for (T g : p->grad.storage()) s += static_cast<double>(g) * g;
  return std::sqrt(s);
}

template <typename T>
std::size_t parameter_count(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

}  // namespace dfx::nn
