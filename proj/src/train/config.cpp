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

#include "dfx/train/config.hpp"

#include <cmath>
#include <numbers>

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"

namespace dfx::train {

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"none", "contrastive", "uncertainty", "full"};
  return names;
}

AblationFlags preset(std::string_view name) {
  if (name == "none") return {false, false, false};
  if (name == "contrastive") return {true, false, false};
  if (name == "uncertainty") return {true, true, false};
  if (name == "full") return {true, true, true};
  throw ConfigError("unknown ablation preset '" + std::string(name) +
                    "' (expected none, contrastive, uncertainty or full)");
}

std::string preset_name(const AblationFlags& flags) {
  for (const auto& n : preset_names())
    if (preset(n) == flags) return n;
  return "custom";
}

void TrainConfig::validate() const {
  if (!(lr_base > 0)) throw ConfigError("train.lr_base must be positive");
  if (warmup_steps < 0) throw ConfigError("train.warmup_steps must be >= 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1 || eval_batch < 1) throw ConfigError("batch sizes must be positive");
  if (ablation.use_contrastive && batch_size < 2)
    throw ConfigError("train.batch_size must be >= 2 with contrastive learning");
  if (clip_norm < 0) throw ConfigError("train.clip_norm must be >= 0");
  if (ablation.use_contrastive && vision.dim != text.dim)
    throw ConfigError("vision.dim and text.dim must match for contrastive learning");
  vision.validate();
  text.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"train",
           {{"lr_base", c.lr_base},
            {"warmup_steps", c.warmup_steps},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"eval_batch", c.eval_batch},
            {"clip_norm", c.clip_norm},
            {"seed", c.seed},
            {"use_contrastive", c.ablation.use_contrastive},
            {"use_uncertainty", c.ablation.use_uncertainty},
            {"use_adapter", c.ablation.use_adapter}}},
          {"loss", c.loss},
          {"vision", c.vision},
          {"text", c.text}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    for (const auto& [key, _] : j.items())
      if (key != "train" && key != "loss" && key != "vision" && key != "text")
        throw ConfigError("unknown config section '" + key + "'");
    const auto t = j.value("train", nlohmann::json::object());
    c.lr_base = t.value("lr_base", c.lr_base);
    c.warmup_steps = t.value("warmup_steps", c.warmup_steps);
    c.epochs = t.value("epochs", c.epochs);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.eval_batch = t.value("eval_batch", c.eval_batch);
    c.clip_norm = t.value("clip_norm", c.clip_norm);
    c.seed = t.value("seed", c.seed);
    c.ablation.use_contrastive = t.value("use_contrastive", c.ablation.use_contrastive);
    c.ablation.use_uncertainty = t.value("use_uncertainty", c.ablation.use_uncertainty);
    c.ablation.use_adapter = t.value("use_adapter", c.ablation.use_adapter);
    if (j.contains("loss")) c.loss = j["loss"].get<objectives::LossConfig>();
    if (j.contains("vision")) c.vision = j["vision"].get<encoder::VisionConfig>();
    if (j.contains("text")) c.text = j["text"].get<encoder::TextConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const nlohmann::json& j) { return hex64(fnv1a64(j.dump())); }

void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' must look like a.b=value");
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("unknown config field '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  const bool numeric_ok = node->is_number() && value.is_number();
  if (!numeric_ok && node->type() != value.type())
    throw ConfigError("override '" + path + "' has the wrong type");
  if (node->is_number_unsigned() && value.is_number_integer() && value.get<long long>() < 0)
    throw ConfigError("override '" + path + "' must be nonnegative");
  *node = value;
}

double warmup_cosine(int step, int total_steps, int warmup, double base) {
  if (total_steps <= warmup)
    throw ConfigError("total steps " + std::to_string(total_steps) +
                      " must exceed the warmup steps " + std::to_string(warmup));
  if (step < 0 || step > total_steps)
    throw ContractError("lr schedule: step " + std::to_string(step) + " outside [0, total]");
  if (step < warmup) return base * static_cast<double>(step) / static_cast<double>(warmup);
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double lr_at(int step, int total_steps, const TrainConfig& cfg) {
  return warmup_cosine(step, total_steps, cfg.warmup_steps, cfg.lr_base);
}

}  // namespace dfx::train
