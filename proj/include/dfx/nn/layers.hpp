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

// Stateless-activation layers: forward writes outputs, backward takes the
// same inputs back plus the upstream gradient. Parameter gradients are
// accumulated (callers zero them per step); input gradients are overwritten.

#pragma once

#include <string>
#include <vector>

#include "dfx/core/rng.hpp"
#include "dfx/core/tensor.hpp"
#include "dfx/nn/param.hpp"

namespace dfx::nn {

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features);

  int in_features() const { return weight.value.cols(); }
  int out_features() const { return weight.value.rows(); }

  void init(Rng& rng, double stddev);

  /// y = x W^T + b, x is rows x in_features.
  void forward(const Tensor<T>& x, Tensor<T>& y) const;
  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>* dx,
                bool param_grads = true);

  void collect(ParamList<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Param<T> weight;  // out x in
  Param<T> bias;    // 1 x out
};

template <typename T>
struct NormStats {
  std::vector<T> mean;
  std::vector<T> rstd;
};

template <typename T>
class LayerNorm {
 public:
  static constexpr double kEps = 1e-5;

  LayerNorm() = default;
  LayerNorm(std::string name, int dim);

  void forward(const Tensor<T>& x, Tensor<T>& y, NormStats<T>& stats) const;
  void backward(const Tensor<T>& x, const NormStats<T>& stats,
                const Tensor<T>& dy, Tensor<T>& dx, bool param_grads = true);

  void collect(ParamList<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  Param<T> gamma;
  Param<T> beta;
};

}  // namespace dfx::nn
