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

#include "dfx/nn/adam.hpp"

#include <cmath>

#include "dfx/kernels/kernels.hpp"

namespace dfx::nn {

template <typename T>
Adam<T>::Adam(ParamList<T> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto* p : params_) {
    m_.emplace_back(p->value.size(), T(0));
    v_.emplace_back(p->value.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    kernels::adam_step(p->value.size(), p->value.data(), p->grad.data(),
                       m_[i].data(), v_[i].data(), static_cast<T>(lr),
                       static_cast<T>(options_.beta1),
                       static_cast<T>(options_.beta2),
                       static_cast<T>(options_.eps), static_cast<T>(bc1),
                       static_cast<T>(bc2));
  }
}

template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto* p : params) kernels::scale(p->grad.size(), s, p->grad.data());
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double clip_grad_norm(const ParamList<float>&, double);
template double clip_grad_norm(const ParamList<double>&, double);

}  // namespace dfx::nn
