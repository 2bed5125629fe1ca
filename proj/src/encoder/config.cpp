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

#include "dfx/encoder/config.hpp"

#include <string>

#include "dfx/core/error.hpp"

namespace dfx::encoder {

void VisionConfig::validate() const {
  if (image_side <= 0 || patch_size <= 0 || image_side % patch_size != 0)
    throw ConfigError("image_side " + std::to_string(image_side) +
                      " must be a positive multiple of patch_size " +
                      std::to_string(patch_size));
  if (dim <= 0 || heads <= 0 || dim % heads != 0)
    throw ConfigError("dim " + std::to_string(dim) + " must be divisible by heads " +
                      std::to_string(heads));
  if (layers < 2) throw ConfigError("vision encoder needs at least 2 layers");
  if (head_layers < 1) throw ConfigError("head stacks need at least 1 layer");
  if (hidden() <= 0) throw ConfigError("mlp_ratio must be positive");
}

void TextConfig::validate() const {
  if (buckets <= 0 || max_len <= 0 || layers < 0)
    throw ConfigError("text encoder buckets, max_len and layers must be positive");
  if (dim <= 0 || heads <= 0 || dim % heads != 0)
    throw ConfigError("text dim must be divisible by heads");
}

void to_json(nlohmann::json& j, const VisionConfig& c) {
  j = {{"image_side", c.image_side}, {"patch_size", c.patch_size},
       {"dim", c.dim},               {"layers", c.layers},
       {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio},
       {"head_layers", c.head_layers}, {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, VisionConfig& c) {
  c.image_side = j.value("image_side", c.image_side);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.dim = j.value("dim", c.dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.head_layers = j.value("head_layers", c.head_layers);
  c.init_std = j.value("init_std", c.init_std);
  c.validate();
}

void to_json(nlohmann::json& j, const TextConfig& c) {
  j = {{"buckets", c.buckets}, {"dim", c.dim},          {"layers", c.layers},
       {"heads", c.heads},     {"max_len", c.max_len},  {"mlp_ratio", c.mlp_ratio},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TextConfig& c) {
  c.buckets = j.value("buckets", c.buckets);
  c.dim = j.value("dim", c.dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.max_len = j.value("max_len", c.max_len);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

}  // namespace dfx::encoder
