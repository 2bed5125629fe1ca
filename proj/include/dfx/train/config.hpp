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

// Stage-1 run configuration, ablation presets, schedule and dot-path
// overrides.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dfx/encoder/config.hpp"
#include "dfx/objectives/losses.hpp"

namespace dfx::train {

struct AblationFlags {
  bool use_contrastive = true;
  bool use_uncertainty = true;
  bool use_adapter = true;
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

/// Named configurations, in the order rows are added: "none" (classification
/// only), "contrastive", "uncertainty" (contrastive + sampled embeddings) and
/// "full" (all three plus the gated adapter).
const std::vector<std::string>& preset_names();
AblationFlags preset(std::string_view name);
/// Name of the preset matching flags, or "custom".
std::string preset_name(const AblationFlags& flags);

struct TrainConfig {
  double lr_base = 3e-4;
  int warmup_steps = 100;
  int epochs = 3;
  int batch_size = 32;
  int eval_batch = 64;
  double clip_norm = 1.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  AblationFlags ablation;
  objectives::LossConfig loss;
  encoder::VisionConfig vision;
  encoder::TextConfig text;

  void validate() const;
};

/// Sectioned layout: {"train": {...}, "loss": {...}, "vision": {...}, "text": {...}}.
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
std::string config_hash(const nlohmann::json& j);

/// Applies "section.key=value" to a config document. The value is parsed as
/// JSON when possible, otherwise taken as a string. Unknown paths throw
/// ConfigError.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Linear warmup to base over warmup steps, then cosine decay to 0 at
/// total_steps. Throws ConfigError if total_steps <= warmup.
double warmup_cosine(int step, int total_steps, int warmup, double base);
double lr_at(int step, int total_steps, const TrainConfig& cfg);

}  // namespace dfx::train
