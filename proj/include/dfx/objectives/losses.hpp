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

// Training objectives in 64-bit floats. Each loss returns its value together
// with analytic gradients w.r.t. every differentiable input.

#pragma once

#include <span>
#include <vector>

#include "json.hpp"

#include "dfx/core/tensor.hpp"

namespace dfx::objectives {

struct LossConfig {
  double alpha = 0.05;              // contrastive weight
  double beta = 1.0;                // classification weight
  double temperature_init = 14.285; // learnable similarity scale, ~1/0.07
  double temperature_min = 1.0;
  double temperature_max = 100.0;
  double kl_weight = 0.0;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

/// Clamps the temperature into [min, max] after an optimizer update.
double clamp_temperature(double w, const LossConfig& cfg);

struct ContrastiveResult {
  double loss = 0;
  Tensor<double> dz;  // B x d
  Tensor<double> dt;  // B x d
  double dw = 0;
};

/// Symmetric image-text cross-entropy over cosine similarities scaled by w.
/// Row i of Z is paired with row i of T. Throws DegenerateInputError on a
/// zero-norm row and ShapeError on mismatched shapes.
ContrastiveResult contrastive_loss(const Tensor<double>& z,
                                   const Tensor<double>& t, double w);

struct BceResult {
  double loss = 0;
  std::vector<double> dlogits;  // d(mean loss)/d logit_i = (sigmoid - y) / B
};

/// Mean binary cross-entropy on logits, in the stable softplus form.
BceResult bce_loss(std::span<const double> logits, std::span<const double> labels);

double sigmoid(double x);
double softplus(double x);

struct KlResult {
  double loss = 0;
  Tensor<double> dmu;
  Tensor<double> dsigma;
};

/// Mean over all entries of KL(N(mu, sigma^2) || N(0, 1)).
KlResult kl_regularizer(const Tensor<double>& mu, const Tensor<double>& sigma);

/// beta * cls + alpha * cst + kl_weight * kl.
double total_loss(double cls, double cst, double kl, const LossConfig& cfg);

struct NllResult {
  double loss = 0;
  Tensor<double> dlogits;  // same shape as logits, zero on unmasked rows
  int count = 0;
};

/// Mean negative log-likelihood of targets[j] under softmax(logits row j)
/// over rows with mask[j] set. Throws ContractError if no row is masked.
NllResult masked_nll(const Tensor<double>& logits, std::span<const int> targets,
                     std::span<const unsigned char> mask);

}  // namespace dfx::objectives
