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

#include "dfx/encoder/text_encoder.hpp"

#include <cctype>

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"
#include "dfx/core/rng.hpp"

namespace dfx::encoder {

std::vector<std::string> text_words(std::string_view sentence) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : sentence) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

TextEncoder::TextEncoder(TextConfig cfg)
    : cfg_(cfg),
      token_embed_("text.token_embed", cfg.buckets, cfg.dim),
      pos_embed_("text.pos_embed", cfg.max_len, cfg.dim),
      norm_("text.norm", cfg.dim) {
  cfg_.validate();
  Rng rng(derive_seed(cfg_.seed, "text-encoder"));
  token_embed_.fill_normal(rng, 1.0);
  pos_embed_.fill_normal(rng, 0.1);
  const int hidden = static_cast<int>(cfg_.dim * cfg_.mlp_ratio);
  for (int l = 0; l < cfg_.layers; ++l) {
    blocks_.emplace_back("text.block" + std::to_string(l), cfg_.dim, cfg_.heads,
                         hidden, false);
    blocks_.back().init(rng, 0.05);
  }
}

std::vector<int> TextEncoder::token_ids(std::string_view sentence) const {
  std::vector<int> ids;
  for (const auto& w : text_words(sentence)) {
    if (static_cast<int>(ids.size()) == cfg_.max_len) break;
    ids.push_back(static_cast<int>(fnv1a64(w) % static_cast<std::uint64_t>(cfg_.buckets)));
  }
  return ids;
}

std::vector<float> TextEncoder::compute(const std::vector<int>& ids) const {
  const int n = static_cast<int>(ids.size()), d = cfg_.dim;
  Tensor<float> x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      x(i, j) = token_embed_.value(ids[static_cast<std::size_t>(i)], j) + pos_embed_.value(i, j);
  for (const auto& b : blocks_) {
    nn::BlockCache<float> c;
    Tensor<float> y;
    b.forward(x, 1, n, nn::QueryRows::kAll, c, y);
    x = std::move(y);
  }
  Tensor<float> h;
  nn::NormStats<float> st;
  norm_.forward(x, h, st);
  std::vector<float> out(static_cast<std::size_t>(d), 0.0f);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += h(i, j);
  for (auto& v : out) v /= static_cast<float>(n);
  return out;
}

std::vector<float> TextEncoder::encode(std::string_view sentence) const {
  const std::string key(sentence);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const auto ids = token_ids(sentence);
  if (ids.empty())
    throw DegenerateInputError("encode_text: sentence has no words: '" + key + "'");
  auto emb = compute(ids);
  std::lock_guard<std::mutex> lock(mu_);
  cache_.emplace(key, emb);
  return emb;
}

nn::ParamList<float> TextEncoder::parameters() const {
  auto* self = const_cast<TextEncoder*>(this);
  nn::ParamList<float> out{&self->token_embed_, &self->pos_embed_};
  for (auto& b : self->blocks_) b.collect(out);
  self->norm_.collect(out);
  return out;
}

std::uint64_t TextEncoder::checksum() const { return nn::checksum(parameters()); }

}  // namespace dfx::encoder
