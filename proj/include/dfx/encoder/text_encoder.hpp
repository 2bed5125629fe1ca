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

// Frozen sentence encoder: hashed word buckets, a small transformer and mean
// pooling. Parameters are drawn once from the configured seed and are never
// trained, so embeddings are a pure function of (config, sentence).

#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dfx/encoder/config.hpp"
#include "dfx/nn/layers.hpp"
#include "dfx/nn/param.hpp"
#include "dfx/nn/transformer.hpp"

namespace dfx::encoder {

/// Lowercased alphanumeric words.
std::vector<std::string> text_words(std::string_view sentence);

class TextEncoder {
 public:
  explicit TextEncoder(TextConfig cfg = {});

  const TextConfig& config() const { return cfg_; }

  /// Throws DegenerateInputError for a sentence without any word.
  std::vector<float> encode(std::string_view sentence) const;
  std::vector<int> token_ids(std::string_view sentence) const;

  std::uint64_t checksum() const;
  /// Read-only view for audits; callers must not modify the values.
  nn::ParamList<float> parameters() const;

 private:
  std::vector<float> compute(const std::vector<int>& ids) const;

  TextConfig cfg_;
  nn::Param<float> token_embed_;
  nn::Param<float> pos_embed_;
  std::vector<nn::TransformerBlock<float>> blocks_;
  nn::LayerNorm<float> norm_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<float>> cache_;
};

}  // namespace dfx::encoder
