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

// Visual-token projector and the decoder-only toy language model.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfx/core/rng.hpp"
#include "dfx/core/tensor.hpp"
#include "dfx/nn/layers.hpp"
#include "dfx/nn/param.hpp"
#include "dfx/nn/transformer.hpp"

namespace dfx::reasoning {

struct ProjectorConfig {
  int d_v = 128;
  int d_l = 256;
  int hidden = 0;  // 0 means 2 * d_l
  int hidden_size() const { return hidden > 0 ? hidden : 2 * d_l; }
  void validate() const;
};

struct ToyLMConfig {
  int vocab_size = 512;
  int layers = 2;
  int d_l = 256;
  int heads = 4;
  int max_seq = 256;
  int mlp_ratio = 4;
  double init_std = 0.02;
  void validate() const;
};

void to_json(nlohmann::json& j, const ProjectorConfig& c);
void from_json(const nlohmann::json& j, ProjectorConfig& c);
void to_json(nlohmann::json& j, const ToyLMConfig& c);
void from_json(const nlohmann::json& j, ToyLMConfig& c);

/// Two-layer GELU MLP applied to every row.
template <typename T>
class Projector {
 public:
  struct Cache {
    Tensor<T> x, h, g;
  };

  Projector() = default;
  explicit Projector(ProjectorConfig cfg);

  const ProjectorConfig& config() const { return cfg_; }
  void init(Rng& rng, double stddev);
  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;
  /// Accumulates parameter gradients; writes the input gradient if dx is set.
  void backward(const Cache& cache, const Tensor<T>& dout, Tensor<T>* dx);
  nn::ParamList<T> parameters();

  nn::Linear<T> fc1, fc2;

 private:
  ProjectorConfig cfg_;
};

/// Row 0 is the class embedding e, rows 1..N_p the patch tokens; the shared
/// MLP maps every row to the language model width: (N_p + 1) x d_l.
template <typename T>
Tensor<T> project_tokens(const Projector<T>& projector, const Tensor<T>& patch_tokens,
                         std::span<const T> e);

/// One training/eval sequence: [BOS] visual question response [EOS].
template <typename T>
struct AssembledSequence {
  std::vector<int> tokens;             // token id per position, kImage on visual rows
  std::vector<unsigned char> visual;   // 1 on visual positions
  std::vector<unsigned char> mask;     // 1 on response positions and EOS
  Tensor<T> visual_tokens;             // n_visual x d_l
  int length() const { return static_cast<int>(tokens.size()); }
};

/// Throws ContractError (never truncates) if the sequence exceeds max_seq.
template <typename T>
AssembledSequence<T> assemble_sequence(const Tensor<T>& visual_tokens,
                                       std::span<const int> question,
                                       std::span<const int> response, int max_seq);

template <typename T>
class ToyLM {
 public:
  struct Cache {
    int batch = 0, seq = 0;
    std::vector<Tensor<T>> inputs;  // block inputs; inputs[0] has positions added
    std::vector<nn::BlockCache<T>> blocks;
    Tensor<T> last;
    nn::NormStats<T> norm;
    Tensor<T> normed;
  };
  struct State {
    std::vector<nn::KvCache<T>> kv;
    int position = 0;
  };

  ToyLM() = default;
  explicit ToyLM(ToyLMConfig cfg);

  const ToyLMConfig& config() const { return cfg_; }
  void init(Rng& rng);

  /// Token embeddings (no positions) for ids, one row each.
  Tensor<T> embed(std::span<const int> ids) const;
  /// Input embeddings of padded sequences stacked row-wise: batch * seq rows.
  /// Visual rows take the soft tokens; padding uses kPad.
  Tensor<T> embed_batch(const std::vector<const AssembledSequence<T>*>& seqs, int seq) const;

  /// x: (batch * seq) x d_l input embeddings. Returns logits (batch * seq) x V.
  Tensor<T> forward(const Tensor<T>& x, int batch, int seq, Cache* cache) const;
  /// dx receives the gradient w.r.t. the input embeddings. Parameter
  /// gradients (including positions) are accumulated when param_grads.
  void backward(const Cache& cache, const Tensor<T>& dlogits, Tensor<T>& dx, bool param_grads);
  /// Adds the embedding-row gradients of token positions to the token table.
  void accumulate_token_grads(const std::vector<const AssembledSequence<T>*>& seqs, int seq,
                              const Tensor<T>& dx);

  /// Feeds x (new positions) through the cached decoder; returns their logits.
  Tensor<T> step(const Tensor<T>& x, State& state) const;
  State start() const;

  nn::ParamList<T> parameters();

 private:
  ToyLMConfig cfg_;
  nn::Param<T> tok_embed_;
  nn::Param<T> pos_embed_;
  std::vector<nn::TransformerBlock<T>> blocks_;
  nn::LayerNorm<T> norm_;
  nn::Linear<T> head_;
};

/// Mean NLL over masked positions; target at position p is predicted from
/// the logits at p - 1. logits: length x V for a single sequence.
template <typename T>
double ar_loss(const Tensor<T>& logits, const AssembledSequence<T>& seq,
               Tensor<double>* dlogits = nullptr);

/// Padded batch version: logits are (seqs.size() * seq) x V and the mean is
/// taken over every masked position of the batch.
template <typename T>
double ar_loss(const Tensor<T>& logits, const std::vector<const AssembledSequence<T>*>& seqs,
               int seq, Tensor<double>* dlogits = nullptr);

}  // namespace dfx::reasoning
