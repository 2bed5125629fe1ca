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

#include "dfx/nn/layers.hpp"

#include "dfx/kernels/kernels.hpp"

namespace dfx::nn {

template <typename T>
Linear<T>::Linear(std::string name, int in_features, int out_features)
    : weight(name + ".weight", out_features, in_features),
      bias(name + ".bias", 1, out_features) {}

template <typename T>
void Linear<T>::init(Rng& rng, double stddev) {
  weight.fill_normal(rng, stddev);
  bias.value.zero();
}

template <typename T>
void Linear<T>::forward(const Tensor<T>& x, Tensor<T>& y) const {
  const int in = in_features(), out = out_features();
  if (x.cols() != in)
    throw ShapeError("linear " + weight.name + ": expected " + std::to_string(in) +
                     " input columns, got " + std::to_string(x.cols()));
  y.resize(x.rows(), out);
  kernels::gemm(false, true, x.rows(), out, in, T(1), x.data(), in,
                weight.value.data(), in, T(0), y.data(), out);
  kernels::add_row_bias(x.rows(), out, bias.value.data(), y.data(), out);
}

template <typename T>
void Linear<T>::backward(const Tensor<T>& x, const Tensor<T>& dy,
                         Tensor<T>* dx, bool param_grads) {
  const int in = in_features(), out = out_features();
  if (dy.cols() != out || dy.rows() != x.rows())
    throw ShapeError("linear " + weight.name + ": gradient shape mismatch");
  if (param_grads) {
    kernels::gemm(true, false, out, in, x.rows(), T(1), dy.data(), out,
                  x.data(), in, T(1), weight.grad.data(), in);
    kernels::column_sum(dy.rows(), out, dy.data(), out, bias.grad.data());
  }
  if (dx != nullptr) {
    dx->resize(x.rows(), in);
    kernels::gemm(false, false, x.rows(), in, out, T(1), dy.data(), out,
                  weight.value.data(), in, T(0), dx->data(), in);
  }
}

template <typename T>
LayerNorm<T>::LayerNorm(std::string name, int dim)
    : gamma(name + ".gamma", 1, dim), beta(name + ".beta", 1, dim) {
  for (auto& g : gamma.value.storage()) g = T(1);
}

template <typename T>
void LayerNorm<T>::forward(const Tensor<T>& x, Tensor<T>& y,
                           NormStats<T>& stats) const {
  const int dim = gamma.value.cols();
  if (x.cols() != dim) throw ShapeError("layernorm " + gamma.name + ": width mismatch");
  y.resize(x.rows(), dim);
  stats.mean.resize(x.rows());
  stats.rstd.resize(x.rows());
  kernels::layernorm(x.rows(), dim, x.data(), gamma.value.data(),
                     beta.value.data(), T(kEps), y.data(), stats.mean.data(),
                     stats.rstd.data());
}

template <typename T>
void LayerNorm<T>::backward(const Tensor<T>& x, const NormStats<T>& stats,
                            const Tensor<T>& dy, Tensor<T>& dx,
                            bool param_grads) {
  const int dim = gamma.value.cols();
  dx.resize(x.rows(), dim);
  if (param_grads) {
    kernels::layernorm_backward(x.rows(), dim, x.data(), gamma.value.data(),
                                stats.mean.data(), stats.rstd.data(), dy.data(),
                                dx.data(), gamma.grad.data(), beta.grad.data());
  } else {
    std::vector<T> scratch_g(dim), scratch_b(dim);
    kernels::layernorm_backward(x.rows(), dim, x.data(), gamma.value.data(),
                                stats.mean.data(), stats.rstd.data(), dy.data(),
                                dx.data(), scratch_g.data(), scratch_b.data());
  }
}

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;

}  // namespace dfx::nn
