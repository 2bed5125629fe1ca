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

#pragma once

#include <cstdint>

#include "json.hpp"

namespace dfx::encoder {

struct VisionConfig {
  int image_side = 64;
  int patch_size = 8;
  int dim = 128;
  int layers = 4;
  int heads = 4;
  double mlp_ratio = 4.0;
  int head_layers = 2;  // depth of each head stack (mu, sigma, statistical)
  double init_std = 0.02;

  int grid() const { return image_side / patch_size; }
  int num_patches() const { return grid() * grid(); }
  int tokens() const { return num_patches() + 1; }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int hidden() const { return static_cast<int>(dim * mlp_ratio); }

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;
};

struct TextConfig {
  int buckets = 8192;
  int dim = 128;
  int layers = 2;
  int heads = 4;
  int max_len = 48;
  double mlp_ratio = 4.0;
  std::uint64_t seed = 0x7e47e47e47e47e47ULL;

  void validate() const;
};

void to_json(nlohmann::json& j, const VisionConfig& c);
void from_json(const nlohmann::json& j, VisionConfig& c);
void to_json(nlohmann::json& j, const TextConfig& c);
void from_json(const nlohmann::json& j, TextConfig& c);

}  // namespace dfx::encoder
