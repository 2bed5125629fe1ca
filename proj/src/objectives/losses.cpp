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

#include "dfx/objectives/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfx/core/error.hpp"

namespace dfx::objectives {

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = {{"alpha", c.alpha},
       {"beta", c.beta},
       {"temperature_init", c.temperature_init},
       {"temperature_min", c.temperature_min},
       {"temperature_max", c.temperature_max},
       {"kl_weight", c.kl_weight}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.temperature_init = j.value("temperature_init", c.temperature_init);
  c.temperature_min = j.value("temperature_min", c.temperature_min);
  c.temperature_max = j.value("temperature_max", c.temperature_max);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  if (c.alpha < 0 || c.beta < 0 || c.kl_weight < 0)
    throw ConfigError("loss weights must be nonnegative");
  if (!(c.temperature_min > 0) || c.temperature_max < c.temperature_min)
    throw ConfigError("temperature bounds must satisfy 0 < min <= max");
}

double clamp_temperature(double w, const LossConfig& cfg) {
  return std::clamp(w, cfg.temperature_min, cfg.temperature_max);
}

namespace {

// Unit-normalizes rows; returns the norms.
std::vector<double> normalize_rows(const Tensor<double>& x, Tensor<double>& out,
                                   const char* what) {
  out = x;
  std::vector<double> norms(static_cast<std::size_t>(x.rows()));
  for (int i = 0; i < x.rows(); ++i) {
    double s = 0;
    for (int j = 0; j < x.cols(); ++j) s += x(i, j) * x(i, j);
    const double n = std::sqrt(s);
    if (!(n > 0) || !std::isfinite(n))
      throw DegenerateInputError(std::string(what) + " row " + std::to_string(i) +
                                 " has zero or non-finite norm");
    norms[static_cast<std::size_t>(i)] = n;
    for (int j = 0; j < x.cols(); ++j) out(i, j) /= n;
  }
  return norms;
}

// d/dx of x / |x| applied to upstream g: (g - xhat <xhat, g>) / |x|.
void normalize_backward(const Tensor<double>& xhat, const std::vector<double>& norms,
                        Tensor<double>& g) {
  for (int i = 0; i < g.rows(); ++i) {
    double d = 0;
    for (int j = 0; j < g.cols(); ++j) d += xhat(i, j) * g(i, j);
    for (int j = 0; j < g.cols(); ++j)
      g(i, j) = (g(i, j) - xhat(i, j) * d) / norms[static_cast<std::size_t>(i)];
  }
}

// Row-wise log-softmax of a square matrix, in place.
void log_softmax_rows(Tensor<double>& s) {
  for (int i = 0; i < s.rows(); ++i) {
    double mx = s(i, 0);
    for (int j = 1; j < s.cols(); ++j) mx = std::max(mx, s(i, j));
    double sum = 0;
    for (int j = 0; j < s.cols(); ++j) sum += std::exp(s(i, j) - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < s.cols(); ++j) s(i, j) -= lse;
  }
}

}  // namespace

ContrastiveResult contrastive_loss(const Tensor<double>& z,
                                   const Tensor<double>& t, double w) {
  if (!z.same_shape(t) || z.rows() < 1 || z.cols() < 1)
    throw ShapeError("contrastive_loss: Z and T must share a nonempty shape");
  const int b = z.rows(), d = z.cols();
  Tensor<double> zh, th;
  const auto zn = normalize_rows(z, zh, "Z");
  const auto tn = normalize_rows(t, th, "T");

  Tensor<double> cos(b, b);
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < b; ++k) {
      double s = 0;
      for (int j = 0; j < d; ++j) s += zh(i, j) * th(k, j);
      cos(i, k) = s;
    }
  // Image-to-text rows of w*cos, and text-to-image rows of its transpose.
  Tensor<double> li(b, b), lt(b, b);
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < b; ++k) {
      li(i, k) = w * cos(i, k);
      lt(i, k) = w * cos(k, i);
    }
  log_softmax_rows(li);
  log_softmax_rows(lt);

  ContrastiveResult r;
  double acc = 0;
  for (int i = 0; i < b; ++i) acc += li(i, i) + lt(i, i);
  r.loss = -acc / (2.0 * b);

  // dL/dS where S = w * cos: (P_i2t - I + (P_t2i - I)^T) / 2B.
  Tensor<double> ds(b, b);
  const double inv = 1.0 / (2.0 * b);
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < b; ++k) {
      const double eye = i == k ? 1.0 : 0.0;
      ds(i, k) = inv * ((std::exp(li(i, k)) - eye) + (std::exp(lt(k, i)) - eye));
    }
  r.dw = 0;
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < b; ++k) r.dw += ds(i, k) * cos(i, k);

  r.dz.resize(b, d);
  r.dt.resize(b, d);
  for (int i = 0; i < b; ++i)
    for (int k = 0; k < b; ++k) {
      const double g = w * ds(i, k);
      if (g == 0) continue;
      for (int j = 0; j < d; ++j) {
        r.dz(i, j) += g * th(k, j);
        r.dt(k, j) += g * zh(i, j);
      }
    }
  normalize_backward(zh, zn, r.dz);
  normalize_backward(th, tn, r.dt);
  return r;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

BceResult bce_loss(std::span<const double> logits, std::span<const double> labels) {
  if (logits.empty() || logits.size() != labels.size())
    throw ShapeError("bce_loss: need equal, nonzero numbers of logits and labels");
  BceResult r;
  r.dlogits.resize(logits.size());
  const double inv = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double y = labels[i], l = logits[i];
    if (y != 0.0 && y != 1.0)
      throw ContractError("bce_loss: label " + std::to_string(y) + " not in {0,1}");
    // -[y log s(l) + (1-y) log(1-s(l))] = softplus(l) - y l
    r.loss += softplus(l) - y * l;
    r.dlogits[i] = (sigmoid(l) - y) * inv;
  }
  r.loss *= inv;
  return r;
}

KlResult kl_regularizer(const Tensor<double>& mu, const Tensor<double>& sigma) {
  if (!mu.same_shape(sigma) || mu.empty())
    throw ShapeError("kl_regularizer: mu and sigma must share a nonempty shape");
  KlResult r;
  r.dmu.resize(mu.rows(), mu.cols());
  r.dsigma.resize(mu.rows(), mu.cols());
  const double inv = 1.0 / static_cast<double>(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = mu[i], s = sigma[i];
    if (!(s > 0)) throw ContractError("kl_regularizer: sigma must be positive");
    r.loss += 0.5 * (s * s + m * m - 1.0 - 2.0 * std::log(s));
    r.dmu[i] = m * inv;
    r.dsigma[i] = (s - 1.0 / s) * inv;
  }
  r.loss *= inv;
  return r;
}

double total_loss(double cls, double cst, double kl, const LossConfig& cfg) {
  return cfg.beta * cls + cfg.alpha * cst + cfg.kl_weight * kl;
}

NllResult masked_nll(const Tensor<double>& logits, std::span<const int> targets,
                     std::span<const unsigned char> mask) {
  const int rows = logits.rows(), v = logits.cols();
  if (targets.size() != static_cast<std::size_t>(rows) || mask.size() != targets.size())
    throw ShapeError("masked_nll: targets and mask must have one entry per row");
  NllResult r;
  for (auto m : mask) r.count += m != 0;
  if (r.count == 0) throw ContractError("masked_nll: loss mask selects no position");
  r.dlogits.resize(rows, v);
  const double inv = 1.0 / r.count;
  for (int j = 0; j < rows; ++j) {
    if (!mask[static_cast<std::size_t>(j)]) continue;
    const int y = targets[static_cast<std::size_t>(j)];
    if (y < 0 || y >= v) throw ContractError("masked_nll: target id out of range");
    const double* row = logits.row(j);
    const double mx = *std::max_element(row, row + v);
    double sum = 0;
    for (int k = 0; k < v; ++k) sum += std::exp(row[k] - mx);
    const double lse = mx + std::log(sum);
    r.loss += lse - row[y];
    for (int k = 0; k < v; ++k) r.dlogits(j, k) = std::exp(row[k] - lse) * inv;
    r.dlogits(j, y) -= inv;
  }
  r.loss *= inv;
  return r;
}

}  // namespace dfx::objectives
