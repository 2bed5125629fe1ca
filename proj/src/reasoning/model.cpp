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

#include "dfx/reasoning/model.hpp"

#include <algorithm>
#include <cstring>

#include "dfx/core/error.hpp"
#include "dfx/kernels/kernels.hpp"
#include "dfx/objectives/losses.hpp"
#include "dfx/reasoning/vocab.hpp"

namespace dfx::reasoning {

void ProjectorConfig::validate() const {
  if (d_v <= 0 || d_l <= 0 || hidden < 0) throw ConfigError("projector sizes must be positive");
}

void ToyLMConfig::validate() const {
  if (vocab_size <= Vocabulary::kNumSpecial) throw ConfigError("lm.vocab_size must exceed 5");
  if (layers < 1 || max_seq < 4 || mlp_ratio < 1) throw ConfigError("invalid lm shape");
  if (d_l <= 0 || heads <= 0 || d_l % heads != 0)
    throw ConfigError("lm.d_l must be divisible by lm.heads");
}

void to_json(nlohmann::json& j, const ProjectorConfig& c) {
  j = {{"d_v", c.d_v}, {"d_l", c.d_l}, {"hidden", c.hidden_size()}};
}

void from_json(const nlohmann::json& j, ProjectorConfig& c) {
  c.d_v = j.value("d_v", c.d_v);
  c.d_l = j.value("d_l", c.d_l);
  c.hidden = j.value("hidden", c.hidden);
  c.validate();
}

void to_json(nlohmann::json& j, const ToyLMConfig& c) {
  j = {{"vocab_size", c.vocab_size}, {"layers", c.layers},   {"d_l", c.d_l},
       {"heads", c.heads},           {"max_seq", c.max_seq}, {"mlp_ratio", c.mlp_ratio},
       {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, ToyLMConfig& c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.layers = j.value("layers", c.layers);
  c.d_l = j.value("d_l", c.d_l);
  c.heads = j.value("heads", c.heads);
  c.max_seq = j.value("max_seq", c.max_seq);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.init_std = j.value("init_std", c.init_std);
  c.validate();
}

// ---- projector ---------------------------------------------------------------

template <typename T>
Projector<T>::Projector(ProjectorConfig cfg)
    : fc1("projector.fc1", cfg.d_v, cfg.hidden_size()),
      fc2("projector.fc2", cfg.hidden_size(), cfg.d_l),
      cfg_(cfg) {
  cfg_.validate();
}

template <typename T>
void Projector<T>::init(Rng& rng, double stddev) {
  fc1.init(rng, stddev);
  fc2.init(rng, stddev);
}

template <typename T>
Tensor<T> Projector<T>::forward(const Tensor<T>& x, Cache* cache) const {
  if (x.cols() != cfg_.d_v)
    throw ShapeError("projector input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(cfg_.d_v));
  Tensor<T> h, g(x.rows(), cfg_.hidden_size()), y;
  fc1.forward(x, h);
  kernels::gelu(h.size(), h.data(), g.data());
  fc2.forward(g, y);
  if (cache) {
    cache->x = x;
    cache->h = std::move(h);
    cache->g = std::move(g);
  }
  return y;
}

template <typename T>
void Projector<T>::backward(const Cache& cache, const Tensor<T>& dout, Tensor<T>* dx) {
  Tensor<T> dg;
  fc2.backward(cache.g, dout, &dg);
  Tensor<T> dh(cache.h.rows(), cache.h.cols());
  kernels::gelu_backward(cache.h.size(), cache.h.data(), dg.data(), dh.data());
  fc1.backward(cache.x, dh, dx);
}

template <typename T>
nn::ParamList<T> Projector<T>::parameters() {
  nn::ParamList<T> out;
  fc1.collect(out);
  fc2.collect(out);
  return out;
}

template <typename T>
Tensor<T> project_tokens(const Projector<T>& projector, const Tensor<T>& patch_tokens,
                         std::span<const T> e) {
  const int dv = projector.config().d_v;
  if (patch_tokens.cols() != dv || static_cast<int>(e.size()) != dv)
    throw ShapeError("project_tokens: inputs must have d_v = " + std::to_string(dv) + " columns");
  Tensor<T> x(patch_tokens.rows() + 1, dv);
  std::copy(e.begin(), e.end(), x.row(0));
  std::copy(patch_tokens.storage().begin(), patch_tokens.storage().end(), x.row(1));
  return projector.forward(x, nullptr);
}

// ---- sequences ---------------------------------------------------------------

template <typename T>
AssembledSequence<T> assemble_sequence(const Tensor<T>& visual_tokens,
                                       std::span<const int> question,
                                       std::span<const int> response, int max_seq) {
  const int nv = visual_tokens.rows();
  const int len = 1 + nv + static_cast<int>(question.size()) + static_cast<int>(response.size()) + 1;
  if (len > max_seq)
    throw ContractError("sequence of " + std::to_string(len) + " tokens exceeds max_seq " +
                        std::to_string(max_seq));
  AssembledSequence<T> s;
  s.visual_tokens = visual_tokens;
  s.tokens.reserve(static_cast<std::size_t>(len));
  auto push = [&](int tok, bool vis, bool loss) {
    s.tokens.push_back(tok);
    s.visual.push_back(vis ? 1 : 0);
    s.mask.push_back(loss ? 1 : 0);
  };
  push(Vocabulary::kBos, false, false);
  for (int i = 0; i < nv; ++i) push(Vocabulary::kImage, true, false);
  for (int t : question) push(t, false, false);
  for (int t : response) push(t, false, true);
  push(Vocabulary::kEos, false, true);
  return s;
}

// ---- language model ----------------------------------------------------------

template <typename T>
ToyLM<T>::ToyLM(ToyLMConfig cfg)
    : cfg_(cfg),
      tok_embed_("lm.tok_embed", cfg.vocab_size, cfg.d_l),
      pos_embed_("lm.pos_embed", cfg.max_seq, cfg.d_l),
      norm_("lm.norm", cfg.d_l),
      head_("lm.head", cfg.d_l, cfg.vocab_size) {
  cfg_.validate();
  for (int i = 0; i < cfg_.layers; ++i)
    blocks_.emplace_back("lm.block" + std::to_string(i), cfg_.d_l, cfg_.heads,
                         cfg_.d_l * cfg_.mlp_ratio, true);
}

template <typename T>
void ToyLM<T>::init(Rng& rng) {
  tok_embed_.fill_normal(rng, cfg_.init_std);
  pos_embed_.fill_normal(rng, cfg_.init_std);
  for (auto& b : blocks_) b.init(rng, cfg_.init_std);
  head_.init(rng, cfg_.init_std);
}

template <typename T>
Tensor<T> ToyLM<T>::embed(std::span<const int> ids) const {
  Tensor<T> out(static_cast<int>(ids.size()), cfg_.d_l);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= cfg_.vocab_size) throw ContractError("token id out of range");
    std::copy_n(tok_embed_.value.row(id), cfg_.d_l, out.row(static_cast<int>(i)));
  }
  return out;
}

template <typename T>
Tensor<T> ToyLM<T>::embed_batch(const std::vector<const AssembledSequence<T>*>& seqs,
                                int seq) const {
  const int b = static_cast<int>(seqs.size());
  Tensor<T> x(b * seq, cfg_.d_l);
  for (int i = 0; i < b; ++i) {
    const auto& s = *seqs[static_cast<std::size_t>(i)];
    if (s.length() > seq) throw ShapeError("embed_batch: sequence longer than the batch width");
    int v = 0;
    for (int p = 0; p < seq; ++p) {
      T* row = x.row(i * seq + p);
      if (p < s.length() && s.visual[static_cast<std::size_t>(p)]) {
        if (s.visual_tokens.cols() != cfg_.d_l) throw ShapeError("visual tokens must be d_l wide");
        std::copy_n(s.visual_tokens.row(v++), cfg_.d_l, row);
      } else {
        const int id = p < s.length() ? s.tokens[static_cast<std::size_t>(p)] : Vocabulary::kPad;
        if (id < 0 || id >= cfg_.vocab_size) throw ContractError("token id out of range");
        std::copy_n(tok_embed_.value.row(id), cfg_.d_l, row);
      }
    }
  }
  return x;
}

template <typename T>
Tensor<T> ToyLM<T>::forward(const Tensor<T>& x, int batch, int seq, Cache* cache) const {
  if (seq > cfg_.max_seq) throw ContractError("sequence longer than lm.max_seq");
  if (x.rows() != batch * seq || x.cols() != cfg_.d_l) throw ShapeError("lm input shape");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.batch = batch;
  c.seq = seq;
  c.inputs.assign(1, x);
  for (int b = 0; b < batch; ++b)
    for (int p = 0; p < seq; ++p)
      kernels::axpy(static_cast<std::size_t>(cfg_.d_l), T(1), pos_embed_.value.row(p),
                    c.inputs[0].row(b * seq + p));
  c.blocks.resize(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    Tensor<T> out;
    blocks_[i].forward(c.inputs[i], batch, seq, nn::QueryRows::kAll, c.blocks[i], out);
    if (i + 1 < blocks_.size())
      c.inputs.push_back(std::move(out));
    else
      c.last = std::move(out);
  }
  norm_.forward(c.last, c.normed, c.norm);
  Tensor<T> logits;
  head_.forward(c.normed, logits);
  return logits;
}

template <typename T>
void ToyLM<T>::backward(const Cache& c, const Tensor<T>& dlogits, Tensor<T>& dx,
                        bool param_grads) {
  Tensor<T> dn, dcur;
  head_.backward(c.normed, dlogits, &dn, param_grads);
  norm_.backward(c.last, c.norm, dn, dcur, param_grads);
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    Tensor<T> dprev;
    blocks_[i].backward(c.inputs[i], c.batch, c.seq, c.blocks[i], dcur, dprev, param_grads);
    dcur = std::move(dprev);
  }
  if (param_grads)
    for (int b = 0; b < c.batch; ++b)
      for (int p = 0; p < c.seq; ++p)
        kernels::axpy(static_cast<std::size_t>(cfg_.d_l), T(1), dcur.row(b * c.seq + p),
                      pos_embed_.grad.row(p));
  dx = std::move(dcur);
}

template <typename T>
void ToyLM<T>::accumulate_token_grads(const std::vector<const AssembledSequence<T>*>& seqs,
                                      int seq, const Tensor<T>& dx) {
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = *seqs[i];
    for (int p = 0; p < seq; ++p) {
      if (p < s.length() && s.visual[static_cast<std::size_t>(p)]) continue;
      const int id = p < s.length() ? s.tokens[static_cast<std::size_t>(p)] : Vocabulary::kPad;
      kernels::axpy(static_cast<std::size_t>(cfg_.d_l), T(1),
                    dx.row(static_cast<int>(i) * seq + p), tok_embed_.grad.row(id));
    }
  }
}

template <typename T>
typename ToyLM<T>::State ToyLM<T>::start() const {
  State s;
  s.kv.resize(blocks_.size());
  return s;
}

template <typename T>
Tensor<T> ToyLM<T>::step(const Tensor<T>& x, State& state) const {
  if (state.kv.size() != blocks_.size()) throw ContractError("decoder state not started");
  const int n = x.rows();
  if (state.position + n > cfg_.max_seq)
    throw ContractError("generation exceeds lm.max_seq " + std::to_string(cfg_.max_seq));
  Tensor<T> cur = x;
  for (int i = 0; i < n; ++i)
    kernels::axpy(static_cast<std::size_t>(cfg_.d_l), T(1),
                  pos_embed_.value.row(state.position + i), cur.row(i));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    Tensor<T> out;
    blocks_[i].forward_incremental(cur, state.kv[i], out);
    cur = std::move(out);
  }
  state.position += n;
  Tensor<T> normed, logits;
  nn::NormStats<T> stats;
  norm_.forward(cur, normed, stats);
  head_.forward(normed, logits);
  return logits;
}

template <typename T>
nn::ParamList<T> ToyLM<T>::parameters() {
  nn::ParamList<T> out{&tok_embed_, &pos_embed_};
  for (auto& b : blocks_) b.collect(out);
  norm_.collect(out);
  head_.collect(out);
  return out;
}

template <typename T>
double ar_loss(const Tensor<T>& logits, const std::vector<const AssembledSequence<T>*>& seqs,
               int seq, Tensor<double>* dlogits) {
  const int b = static_cast<int>(seqs.size());
  if (logits.rows() != b * seq) throw ShapeError("ar_loss: logits rows != batch * seq");
  std::vector<int> targets(static_cast<std::size_t>(b * seq), 0);
  std::vector<unsigned char> mask(targets.size(), 0);
  for (int i = 0; i < b; ++i) {
    const auto& s = *seqs[static_cast<std::size_t>(i)];
    if (s.length() > seq) throw ShapeError("ar_loss: sequence longer than the batch width");
    for (int p = 1; p < s.length(); ++p) {
      if (!s.mask[static_cast<std::size_t>(p)]) continue;
      const auto row = static_cast<std::size_t>(i * seq + p - 1);
      targets[row] = s.tokens[static_cast<std::size_t>(p)];
      mask[row] = 1;
    }
  }
  auto r = objectives::masked_nll(logits.template cast<double>(), targets, mask);
  if (dlogits) *dlogits = std::move(r.dlogits);
  return r.loss;
}

template <typename T>
double ar_loss(const Tensor<T>& logits, const AssembledSequence<T>& seq,
               Tensor<double>* dlogits) {
  return ar_loss(logits, std::vector<const AssembledSequence<T>*>{&seq}, seq.length(), dlogits);
}

#define DFX_INSTANTIATE(T)                                                                    \
  template class Projector<T>;                                                                \
  template class ToyLM<T>;                                                                    \
  template Tensor<T> project_tokens(const Projector<T>&, const Tensor<T>&, std::span<const T>); \
  template AssembledSequence<T> assemble_sequence(const Tensor<T>&, std::span<const int>,     \
                                                  std::span<const int>, int);                 \
  template double ar_loss(const Tensor<T>&, const AssembledSequence<T>&, Tensor<double>*);    \
  template double ar_loss(const Tensor<T>&, const std::vector<const AssembledSequence<T>*>&,  \
                          int, Tensor<double>*);
DFX_INSTANTIATE(float)
DFX_INSTANTIATE(double)
#undef DFX_INSTANTIATE

}  // namespace dfx::reasoning
