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

#include "dfx/encoder/detector.hpp"

#include <cmath>
#include <cstring>

#include "dfx/core/error.hpp"
#include "dfx/kernels/kernels.hpp"

namespace dfx::encoder {

namespace {

template <typename T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T logistic(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace

template <typename T>
T sigma_from_raw(T raw) {
  return softplus(raw) + T(kSigmaFloor);
}

template <typename T>
std::vector<T> aggregate(std::span<const T> v, std::span<const T> z, T w1, T w2) {
  if (v.size() != z.size()) throw ShapeError("aggregate: v and z differ in length");
  if (std::abs(static_cast<double>(w1) + static_cast<double>(w2) - 1.0) > 1e-6)
    throw ContractError("aggregate: gate weights must sum to 1");
  std::vector<T> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = w1 * v[i] + w2 * z[i];
  return e;
}

template <typename T>
Tensor<T> reparameterize(const EmbeddingDistribution<T>& d, const Tensor<T>& eps) {
  if (!d.mu.same_shape(d.sigma) || !d.mu.same_shape(eps))
    throw ShapeError("reparameterize: mu, sigma and eps must share a shape");
  Tensor<T> z(d.mu.rows(), d.mu.cols());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = d.mu[i] + d.sigma[i] * eps[i];
  return z;
}

// ---- HeadStack --------------------------------------------------------------

template <typename T>
HeadStack<T>::HeadStack(const std::string& name, const VisionConfig& cfg) {
  for (int l = 0; l < cfg.head_layers; ++l)
    blocks_.emplace_back(name + ".block" + std::to_string(l), cfg.dim, cfg.heads,
                         cfg.hidden(), false);
}

template <typename T>
void HeadStack<T>::init(Rng& rng, double stddev) {
  for (auto& b : blocks_) b.init(rng, stddev);
}

template <typename T>
Tensor<T> HeadStack<T>::forward(const Tensor<T>& h, int batch, int seq,
                                Cache* cache) const {
  const int n = static_cast<int>(blocks_.size());
  if (cache) {
    cache->inputs.resize(static_cast<std::size_t>(n));
    cache->blocks.resize(static_cast<std::size_t>(n));
  }
  Tensor<T> x = h, y;
  for (int l = 0; l < n; ++l) {
    const auto rows = l + 1 == n ? nn::QueryRows::kFirstRow : nn::QueryRows::kAll;
    nn::BlockCache<T> local;
    nn::BlockCache<T>& c = cache ? cache->blocks[static_cast<std::size_t>(l)] : local;
    blocks_[static_cast<std::size_t>(l)].forward(x, batch, seq, rows, c, y);
    if (cache) cache->inputs[static_cast<std::size_t>(l)] = std::move(x);
    x = std::move(y);
  }
  return x;
}

template <typename T>
void HeadStack<T>::backward(const Cache& cache, int batch, int seq,
                            const Tensor<T>& dout, Tensor<T>& dh) {
  Tensor<T> g = dout, dx;
  for (int l = static_cast<int>(blocks_.size()) - 1; l >= 0; --l) {
    const auto i = static_cast<std::size_t>(l);
    blocks_[i].backward(cache.inputs[i], batch, seq, cache.blocks[i], g, dx);
    g = std::move(dx);
  }
  kernels::axpy(dh.size(), T(1), g.data(), dh.data());
}

template <typename T>
void HeadStack<T>::set_identity() {
  for (auto& b : blocks_) {
    b.attn.w_out.value.zero();
    b.attn.b_out.value.zero();
    b.fc2.weight.value.zero();
    b.fc2.bias.value.zero();
  }
}

template <typename T>
void HeadStack<T>::collect(nn::ParamList<T>& out) {
  for (auto& b : blocks_) b.collect(out);
}

// ---- Detector ---------------------------------------------------------------

template <typename T>
Detector<T>::Detector(VisionConfig cfg)
    : cfg_(cfg),
      patch_embed_("vision.patch_embed", cfg.patch_dim(), cfg.dim),
      cls_token_("vision.cls_token", 1, cfg.dim),
      pos_embed_("vision.pos_embed", cfg.tokens(), cfg.dim),
      norm_("vision.norm", cfg.dim),
      mu_head_("head.mu", cfg),
      sigma_head_("head.sigma", cfg),
      stat_head_("head.stat", cfg),
      gate_("gate", cfg.dim, 2),
      classifier_("classifier", cfg.dim, 1),
      temperature_("temperature", 1, 1) {
  cfg_.validate();
  for (int l = 0; l < cfg.layers; ++l)
    blocks_.emplace_back("vision.block" + std::to_string(l), cfg.dim, cfg.heads,
                         cfg.hidden(), false);
  temperature_.value[0] = T(14.285);
}

template <typename T>
void Detector<T>::init(std::uint64_t seed) {
  const double s = cfg_.init_std;
  Rng rng = make_rng(seed, "init");
  patch_embed_.init(rng, s);
  cls_token_.fill_normal(rng, s);
  pos_embed_.fill_normal(rng, s);
  for (auto& b : blocks_) b.init(rng, s);
  mu_head_.init(rng, s);
  sigma_head_.init(rng, s);
  stat_head_.init(rng, s);
  gate_.init(rng, s);
  classifier_.init(rng, s);
}

template <typename T>
void Detector<T>::patchify(std::span<const float* const> images, Tensor<T>& out) const {
  const int side = cfg_.image_side, p = cfg_.patch_size, g = cfg_.grid();
  const int np = cfg_.num_patches();
  out.resize(static_cast<int>(images.size()) * np, cfg_.patch_dim());
  for (std::size_t b = 0; b < images.size(); ++b) {
    const float* img = images[b];
    for (int py = 0; py < g; ++py) {
      for (int px = 0; px < g; ++px) {
        T* dst = out.row(static_cast<int>(b) * np + py * g + px);
        for (int y = 0; y < p; ++y) {
          const float* src =
              img + (static_cast<std::size_t>(py * p + y) * side + px * p) * 3;
          for (int k = 0; k < p * 3; ++k) *dst++ = static_cast<T>(2.0f * src[k] - 1.0f);
        }
      }
    }
  }
}

template <typename T>
RawEmbedding<T> Detector<T>::encode(std::span<const float* const> images,
                                    bool keep_penultimate, BackboneCache* cache) const {
  const int batch = static_cast<int>(images.size());
  const int seq = cfg_.tokens(), np = cfg_.num_patches(), d = cfg_.dim;
  BackboneCache local;
  BackboneCache& c = cache ? *cache : local;
  patchify(images, c.patches);
  Tensor<T> emb;
  patch_embed_.forward(c.patches, emb);
  Tensor<T> x(batch * seq, d);
  for (int b = 0; b < batch; ++b) {
    T* row = x.row(b * seq);
    for (int j = 0; j < d; ++j) row[j] = cls_token_.value[j] + pos_embed_.value(0, j);
    for (int i = 0; i < np; ++i) {
      T* r = x.row(b * seq + 1 + i);
      const T* e = emb.row(b * np + i);
      const T* pe = pos_embed_.value.row(1 + i);
      for (int j = 0; j < d; ++j) r[j] = e[j] + pe[j];
    }
  }
  const int layers = static_cast<int>(blocks_.size());
  c.inputs.resize(static_cast<std::size_t>(layers));
  c.blocks.resize(static_cast<std::size_t>(layers));
  RawEmbedding<T> raw;
  raw.batch = batch;
  raw.tokens = seq;
  for (int l = 0; l < layers; ++l) {
    const auto i = static_cast<std::size_t>(l);
    Tensor<T> y;
    blocks_[i].forward(x, batch, seq, nn::QueryRows::kAll, c.blocks[i], y);
    c.inputs[i] = std::move(x);
    x = std::move(y);
    if (keep_penultimate && l == layers - 2) {
      raw.penultimate.resize(batch * np, d);
      for (int b = 0; b < batch; ++b)
        std::memcpy(raw.penultimate.row(b * np), x.row(b * seq + 1),
                    sizeof(T) * static_cast<std::size_t>(np) * d);
    }
  }
  norm_.forward(x, raw.h, c.norm);
  c.last = std::move(x);
  return raw;
}

template <typename T>
EmbeddingDistribution<T> Detector<T>::prob_head(const RawEmbedding<T>& raw) const {
  EmbeddingDistribution<T> d;
  d.mu = mu_head_.forward(raw.h, raw.batch, raw.tokens, nullptr);
  d.sigma = sigma_head_.forward(raw.h, raw.batch, raw.tokens, nullptr);
  for (auto& s : d.sigma.storage()) s = sigma_from_raw(s);
  return d;
}

template <typename T>
Tensor<T> Detector<T>::statistical_branch(const RawEmbedding<T>& raw) const {
  return stat_head_.forward(raw.h, raw.batch, raw.tokens, nullptr);
}

template <typename T>
Tensor<T> Detector<T>::gate(const Tensor<T>& v) const {
  Tensor<T> w;
  gate_.forward(v, w);
  for (int b = 0; b < w.rows(); ++b) kernels::softmax(2, w.row(b));
  return w;
}

template <typename T>
std::vector<T> Detector<T>::classify_logit(const Tensor<T>& e) const {
  Tensor<T> l;
  classifier_.forward(e, l);
  return l.storage();
}

template <typename T>
DetectorOutputs<T> Detector<T>::forward(std::span<const float* const> images,
                                        const ForwardOptions& options,
                                        const Tensor<T>* eps, Cache* cache) const {
  const int batch = static_cast<int>(images.size());
  const int d = cfg_.dim;
  if (options.use_adapter && !options.need_z)
    throw ContractError("the adapter aggregates z, so need_z must be set");
  if (options.sample && (!eps || eps->rows() != batch || eps->cols() != d))
    throw ShapeError("sampling needs eps of shape batch x dim");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.options = options;
  DetectorOutputs<T> out;
  out.batch = batch;
  c.raw = encode(images, options.keep_penultimate, cache ? &c.backbone : nullptr);
  const RawEmbedding<T>& raw = c.raw;
  const int seq = raw.tokens;

  out.v = stat_head_.forward(raw.h, batch, seq, cache ? &c.stat : nullptr);
  if (options.need_z) {
    out.mu = mu_head_.forward(raw.h, batch, seq, cache ? &c.mu : nullptr);
    if (options.sample) {
      out.sigma_raw = sigma_head_.forward(raw.h, batch, seq, cache ? &c.sigma : nullptr);
      out.sigma = out.sigma_raw;
      for (auto& s : out.sigma.storage()) s = sigma_from_raw(s);
      c.eps = *eps;
      out.z = reparameterize(EmbeddingDistribution<T>{out.mu, out.sigma}, *eps);
    } else {
      out.z = out.mu;
    }
  }
  if (options.use_adapter) {
    out.w = gate(out.v);
    out.e.resize(batch, d);
    for (int b = 0; b < batch; ++b) {
      const auto e = aggregate<T>(out.v.row_span(b), out.z.row_span(b), out.w(b, 0),
                                  out.w(b, 1));
      std::copy(e.begin(), e.end(), out.e.row(b));
    }
  } else {
    out.w.resize(batch, 2);
    for (int b = 0; b < batch; ++b) out.w(b, 0) = T(1);
    out.e = out.v;
  }
  out.logits = classify_logit(out.e);
  return out;
}

template <typename T>
void Detector<T>::backward(const Cache& c, const DetectorOutputs<T>& out,
                           const DetectorGrads<T>& grads) {
  const auto& opt = c.options;
  const int batch = out.batch, d = cfg_.dim;
  const int seq = c.raw.tokens;
  if (grads.dlogit.size() != static_cast<std::size_t>(batch))
    throw ShapeError("backward: need one logit gradient per image");

  Tensor<T> dl(batch, 1);
  for (int b = 0; b < batch; ++b) dl[static_cast<std::size_t>(b)] = grads.dlogit[static_cast<std::size_t>(b)];
  Tensor<T> de;
  classifier_.backward(out.e, dl, &de);

  Tensor<T> dv(batch, d), dz(batch, d);
  if (!grads.dz.empty()) dz = grads.dz;
  if (opt.use_adapter) {
    Tensor<T> dw(batch, 2);
    for (int b = 0; b < batch; ++b) {
      const T w1 = out.w(b, 0), w2 = out.w(b, 1);
      const T* g = de.row(b);
      T s1 = 0, s2 = 0;
      for (int j = 0; j < d; ++j) {
        dv(b, j) += w1 * g[j];
        dz(b, j) += w2 * g[j];
        s1 += g[j] * out.v(b, j);
        s2 += g[j] * out.z(b, j);
      }
      const T dwr[2] = {s1, s2};
      kernels::softmax_backward(2, out.w.row(b), dwr, dw.row(b));
    }
    Tensor<T> dv_gate;
    gate_.backward(out.v, dw, &dv_gate);
    kernels::axpy(dv.size(), T(1), dv_gate.data(), dv.data());
  } else {
    kernels::axpy(dv.size(), T(1), de.data(), dv.data());
  }

  Tensor<T> dh(batch * seq, d);
  stat_head_.backward(c.stat, batch, seq, dv, dh);
  if (opt.need_z) {
    Tensor<T> dmu = dz;
    if (!grads.dmu.empty()) kernels::axpy(dmu.size(), T(1), grads.dmu.data(), dmu.data());
    mu_head_.backward(c.mu, batch, seq, dmu, dh);
    if (opt.sample) {
      Tensor<T> draw(batch, d);
      for (std::size_t i = 0; i < draw.size(); ++i) {
        T ds = dz[i] * c.eps[i];
        if (!grads.dsigma.empty()) ds += grads.dsigma[i];
        draw[i] = ds * logistic(out.sigma_raw[i]);
      }
      sigma_head_.backward(c.sigma, batch, seq, draw, dh);
    }
  }

  // Backbone.
  const auto& bc = c.backbone;
  Tensor<T> dx;
  norm_.backward(bc.last, bc.norm, dh, dx);
  for (int l = static_cast<int>(blocks_.size()) - 1; l >= 0; --l) {
    const auto i = static_cast<std::size_t>(l);
    Tensor<T> dprev;
    blocks_[i].backward(bc.inputs[i], batch, seq, bc.blocks[i], dx, dprev);
    dx = std::move(dprev);
  }
  const int np = cfg_.num_patches();
  Tensor<T> demb(batch * np, d);
  for (int b = 0; b < batch; ++b) {
    kernels::axpy(static_cast<std::size_t>(d), T(1), dx.row(b * seq), cls_token_.grad.data());
    kernels::axpy(static_cast<std::size_t>(seq) * d, T(1), dx.row(b * seq),
                  pos_embed_.grad.data());
    std::memcpy(demb.row(b * np), dx.row(b * seq + 1),
                sizeof(T) * static_cast<std::size_t>(np) * d);
  }
  patch_embed_.backward(bc.patches, demb, nullptr);
}

template <typename T>
nn::ParamList<T> Detector<T>::backbone_parameters() {
  nn::ParamList<T> out;
  patch_embed_.collect(out);
  out.push_back(&cls_token_);
  out.push_back(&pos_embed_);
  for (auto& b : blocks_) b.collect(out);
  norm_.collect(out);
  return out;
}

template <typename T>
nn::ParamList<T> Detector<T>::gate_parameters() {
  nn::ParamList<T> out;
  gate_.collect(out);
  return out;
}

template <typename T>
nn::ParamList<T> Detector<T>::classifier_parameters() {
  nn::ParamList<T> out;
  classifier_.collect(out);
  return out;
}

template <typename T>
nn::ParamList<T> Detector<T>::parameters() {
  nn::ParamList<T> out = backbone_parameters();
  mu_head_.collect(out);
  sigma_head_.collect(out);
  stat_head_.collect(out);
  gate_.collect(out);
  classifier_.collect(out);
  out.push_back(&temperature_);
  return out;
}

template float sigma_from_raw(float);
template double sigma_from_raw(double);
template std::vector<float> aggregate(std::span<const float>, std::span<const float>,
                                      float, float);
template std::vector<double> aggregate(std::span<const double>, std::span<const double>,
                                       double, double);
template Tensor<float> reparameterize(const EmbeddingDistribution<float>&,
                                      const Tensor<float>&);
template Tensor<double> reparameterize(const EmbeddingDistribution<double>&,
                                       const Tensor<double>&);
template class HeadStack<float>;
template class HeadStack<double>;
template class Detector<float>;
template class Detector<double>;

}  // namespace dfx::encoder
