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

// The stage-1 detector: a patch transformer producing tokens h, three
// two-block attention heads over h (mean, spread, statistical), a gate on the
// statistical feature, the gated aggregate and a linear classifier.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dfx/core/rng.hpp"
#include "dfx/core/tensor.hpp"
#include "dfx/encoder/config.hpp"
#include "dfx/nn/layers.hpp"
#include "dfx/nn/param.hpp"
#include "dfx/nn/transformer.hpp"

namespace dfx::encoder {

inline constexpr double kSigmaFloor = 1e-6;

/// Tokens for one or more images.
template <typename T>
struct RawEmbedding {
  int batch = 0;
  int tokens = 0;
  Tensor<T> h;            // (batch * tokens) x dim, final layer after norm
  Tensor<T> penultimate;  // (batch * num_patches) x dim, second-to-last block
                          // output without the class row; empty unless asked

  std::span<const T> class_token(int b = 0) const { return h.row_span(b * tokens); }
};

template <typename T>
struct EmbeddingDistribution {
  Tensor<T> mu;     // batch x dim
  Tensor<T> sigma;  // batch x dim, >= kSigmaFloor
};

/// softplus(raw) + kSigmaFloor.
template <typename T>
T sigma_from_raw(T raw);

/// e = w1 * v + w2 * z. Throws ContractError if |w1 + w2 - 1| > 1e-6.
template <typename T>
std::vector<T> aggregate(std::span<const T> v, std::span<const T> z, T w1, T w2);

/// z = mu + sigma * eps, elementwise.
template <typename T>
Tensor<T> reparameterize(const EmbeddingDistribution<T>& d, const Tensor<T>& eps);

/// N transformer blocks; the last computes only the class row.
template <typename T>
class HeadStack {
 public:
  struct Cache {
    std::vector<Tensor<T>> inputs;
    std::vector<nn::BlockCache<T>> blocks;
  };

  HeadStack() = default;
  HeadStack(const std::string& name, const VisionConfig& cfg);

  void init(Rng& rng, double stddev);
  /// Returns batch x dim (class position).
  Tensor<T> forward(const Tensor<T>& h, int batch, int seq, Cache* cache) const;
  /// Accumulates into dh (same shape as h).
  void backward(const Cache& cache, int batch, int seq, const Tensor<T>& dout,
                Tensor<T>& dh);
  /// Zeroes the attention output and second MLP projection of every block,
  /// which turns each residual block into the identity map.
  void set_identity();
  void collect(nn::ParamList<T>& out);

 private:
  std::vector<nn::TransformerBlock<T>> blocks_;
};

struct ForwardOptions {
  bool need_z = true;       // run the mean head (and the spread head if sampling)
  bool sample = false;      // z = mu + sigma * eps instead of z = mu
  bool use_adapter = true;  // e = gated aggregate instead of e = v
  bool keep_penultimate = false;
};

template <typename T>
struct DetectorOutputs {
  int batch = 0;
  Tensor<T> mu, sigma, sigma_raw, z, v;
  Tensor<T> w;  // batch x 2
  Tensor<T> e;
  std::vector<T> logits;
};

template <typename T>
struct DetectorGrads {
  std::vector<T> dlogit;  // batch
  Tensor<T> dz;           // optional, batch x dim
  Tensor<T> dmu;          // optional extra gradient on mu
  Tensor<T> dsigma;       // optional extra gradient on sigma
};

template <typename T>
class Detector {
 public:
  struct BackboneCache {
    Tensor<T> patches;
    std::vector<Tensor<T>> inputs;  // block inputs, inputs[0] = embedded tokens
    std::vector<nn::BlockCache<T>> blocks;
    Tensor<T> last;  // final block output
    nn::NormStats<T> norm;
  };
  struct Cache {
    ForwardOptions options;
    BackboneCache backbone;
    RawEmbedding<T> raw;
    typename HeadStack<T>::Cache mu, sigma, stat;
    Tensor<T> eps;
  };

  explicit Detector(VisionConfig cfg = {});

  const VisionConfig& config() const { return cfg_; }
  void init(std::uint64_t seed);

  /// Images are side x side x 3 interleaved floats in [0, 1].
  void patchify(std::span<const float* const> images, Tensor<T>& out) const;

  RawEmbedding<T> encode(std::span<const float* const> images, bool keep_penultimate,
                         BackboneCache* cache) const;
  EmbeddingDistribution<T> prob_head(const RawEmbedding<T>& raw) const;
  Tensor<T> statistical_branch(const RawEmbedding<T>& raw) const;
  /// Softmax gate weights for each row of v: batch x 2.
  Tensor<T> gate(const Tensor<T>& v) const;
  std::vector<T> classify_logit(const Tensor<T>& e) const;

  /// Full pass; eps (batch x dim) is used when options.sample is set.
  DetectorOutputs<T> forward(std::span<const float* const> images,
                             const ForwardOptions& options, const Tensor<T>* eps,
                             Cache* cache) const;
  /// Accumulates parameter gradients.
  void backward(const Cache& cache, const DetectorOutputs<T>& out,
                const DetectorGrads<T>& grads);

  nn::ParamList<T> parameters();
  nn::ParamList<T> backbone_parameters();
  nn::ParamList<T> mu_parameters() { return list(mu_head_); }
  nn::ParamList<T> sigma_parameters() { return list(sigma_head_); }
  nn::ParamList<T> statistical_parameters() { return list(stat_head_); }
  nn::ParamList<T> gate_parameters();
  nn::ParamList<T> classifier_parameters();

  nn::Param<T>& temperature() { return temperature_; }
  T temperature_value() const { return temperature_.value[0]; }

  HeadStack<T>& mu_head() { return mu_head_; }
  HeadStack<T>& sigma_head() { return sigma_head_; }
  HeadStack<T>& statistical_head() { return stat_head_; }
  nn::Linear<T>& gate_layer() { return gate_; }
  nn::Linear<T>& classifier() { return classifier_; }

 private:
  static nn::ParamList<T> list(HeadStack<T>& s) {
    nn::ParamList<T> out;
    s.collect(out);
    return out;
  }

  VisionConfig cfg_;
  nn::Linear<T> patch_embed_;
  nn::Param<T> cls_token_;
  nn::Param<T> pos_embed_;
  std::vector<nn::TransformerBlock<T>> blocks_;
  nn::LayerNorm<T> norm_;
  HeadStack<T> mu_head_, sigma_head_, stat_head_;
  nn::Linear<T> gate_;
  nn::Linear<T> classifier_;
  nn::Param<T> temperature_;
};

}  // namespace dfx::encoder
