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

// Word-level vocabulary for the toy language model.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dfx/datagen/captions.hpp"

namespace dfx::reasoning {

/// Lowercased words plus the punctuation marks . , ! ? ; : as their own
/// tokens. Other characters separate words and are dropped.
std::vector<std::string> lm_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kImage = 4;  // marks soft visual positions
  static constexpr int kNumSpecial = 5;

  Vocabulary();
  /// Most frequent words first (ties alphabetical), capped so the total
  /// size including special tokens is at most max_size.
  static Vocabulary build(const std::vector<datagen::InstructionSample>& samples, int max_size);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view word) const;
  const std::string& token(int id) const;

  std::vector<int> encode(std::string_view text) const;
  /// Joins words with spaces, attaches punctuation and capitalizes
  /// sentence starts. Special tokens are skipped.
  std::string decode(std::span<const int> ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  void add(std::string word);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// "fake" if the first sentence of the response mentions fake, else "real".
std::string verdict(std::string_view response);

}  // namespace dfx::reasoning
