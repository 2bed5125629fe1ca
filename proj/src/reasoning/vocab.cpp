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

#include "dfx/reasoning/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "dfx/core/error.hpp"

namespace dfx::reasoning {

namespace {

bool is_punct_token(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

const char* const kSpecial[Vocabulary::kNumSpecial] = {"<pad>", "<bos>", "<eos>", "<unk>",
                                                       "<image>"};

}  // namespace

std::vector<std::string> lm_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
      continue;
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
    if (is_punct_token(c)) out.emplace_back(1, c);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* s : kSpecial) add(s);
}

void Vocabulary::add(std::string word) {
  index_.emplace(word, size());
  tokens_.push_back(std::move(word));
}

Vocabulary Vocabulary::build(const std::vector<datagen::InstructionSample>& samples,
                             int max_size) {
  if (max_size <= kNumSpecial) throw ConfigError("vocabulary size must exceed the special tokens");
  std::map<std::string, long> counts;
  for (const auto& s : samples) {
    for (auto& w : lm_words(s.question)) ++counts[w];
    for (auto& w : lm_words(s.response)) ++counts[w];
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [w, _] : ranked) {
    if (v.size() >= max_size) break;
    v.add(w);
  }
  return v;
}

int Vocabulary::id(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw ContractError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : lm_words(text)) out.push_back(id(w));
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  bool capitalize = true;
  for (int id : ids) {
    if (id < kNumSpecial && id != kUnk) continue;
    const std::string& w = token(id);
    const bool punct = w.size() == 1 && is_punct_token(w[0]);
    if (!punct && !out.empty()) out += ' ';
    std::string piece = w;
    if (!punct && capitalize) {
      piece[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(piece[0])));
      capitalize = false;
    }
    out += piece;
    if (punct && (w == "." || w == "!" || w == "?")) capitalize = true;
  }
  return out;
}

nlohmann::json Vocabulary::to_json() const { return tokens_; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  const auto tokens = j.get<std::vector<std::string>>();
  if (tokens.size() < static_cast<std::size_t>(kNumSpecial))
    throw ConfigError("vocabulary is missing the special tokens");
  for (int i = 0; i < kNumSpecial; ++i)
    if (tokens[static_cast<std::size_t>(i)] != kSpecial[i])
      throw ConfigError("vocabulary special tokens are out of order");
  for (std::size_t i = kNumSpecial; i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

std::string verdict(std::string_view response) {
  std::string first;
  for (char c : response) {
    first += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '.' || c == '!' || c == '?') break;
  }
  return first.find("fake") != std::string::npos ? "fake" : "real";
}

}  // namespace dfx::reasoning
