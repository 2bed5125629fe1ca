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

// Stage 2: instruction tuning of the projector and toy language model on
// frozen encoder features, greedy generation and the reasoner checkpoint.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfx/datagen/captions.hpp"
#include "dfx/reasoning/model.hpp"
#include "dfx/reasoning/vocab.hpp"
#include "dfx/synthface/synthface.hpp"
#include "dfx/train/trainer.hpp"

namespace dfx::reasoning {

struct Stage2Config {
  ProjectorConfig projector;
  ToyLMConfig lm;
  int batch_size = 16;
  int epochs_projector = 1;  // sub-step 1: projector only
  int epochs_joint = 1;      // sub-step 2: projector and language model
  double lr_projector = 1e-3;
  double lr_joint = 1e-3;
  int warmup_steps = 20;
  double clip_norm = 1.0;   // 0 disables clipping
  int lora_rank = 0;        // > 0 trains low-rank adapters instead of the LM weights
  double lora_alpha = 16;
  int eval_samples = 256;   // fixed train subset used for loss snapshots
  int max_new_tokens = 48;
  std::uint64_t seed = 0;

  void validate() const;
};

/// {"stage2": {...}, "projector": {...}, "lm": {...}}
nlohmann::json to_json(const Stage2Config& c);
Stage2Config stage2_config_from_json(const nlohmann::json& j);

/// Frozen encoder inputs for one image: row 0 is the gated class embedding
/// e, rows 1..N_p the second-to-last-layer patch tokens.
struct VisualFeatures {
  Tensor<float> rows;
  double score = 0;  // stage-1 classifier logit
};

std::vector<VisualFeatures> extract_features(const encoder::Detector<float>& detector,
                                             const train::AblationFlags& flags,
                                             const std::vector<const synthface::LabeledImage*>& images,
                                             int batch_size);

struct Generation {
  std::string response;
  std::vector<int> tokens;
  std::string verdict;
};

class Reasoner {
 public:
  Reasoner(Stage2Config cfg, Vocabulary vocab);

  void init(std::uint64_t seed);
  const Stage2Config& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  Projector<float>& projector() { return projector_; }
  ToyLM<float>& lm() { return lm_; }
  const Projector<float>& projector() const { return projector_; }
  const ToyLM<float>& lm() const { return lm_; }

  /// Projects the features and lays out [BOS] visual question response [EOS].
  AssembledSequence<float> assemble(const VisualFeatures& features, std::string_view question,
                                    std::string_view response) const;
  /// Greedy decoding with a key/value cache until EOS or max_new tokens.
  Generation generate(const VisualFeatures& features, std::string_view question,
                      int max_new) const;

  nn::ParamList<float> parameters();

 private:
  Stage2Config cfg_;
  Vocabulary vocab_;
  Projector<float> projector_;
  ToyLM<float> lm_;
};

struct Stage2Step {
  int substep = 0;
  int step = 0;
  double lr = 0;
  double loss = 0;
};

struct Stage2Result {
  std::filesystem::path checkpoint, loss_log;
  double initial_loss = 0;  // eval subset, before training
  double substep1_loss = 0; // eval subset, after sub-step 1
  double final_loss = 0;    // eval subset, after sub-step 2
  std::uint64_t encoder_checksum_before = 0, encoder_checksum_after = 0;
  std::uint64_t lm_checksum_before = 0, lm_checksum_after_substep1 = 0;
  std::uint64_t projector_checksum_before = 0, projector_checksum_after_substep1 = 0;
  std::vector<Stage2Step> steps;
  int train_samples = 0;
};

struct Stage2Options {
  std::function<void(const Stage2Step&)> on_step;
};

/// Trains on instructions whose image is in the corpus train split. The
/// encoder is only read; its checksum is verified after training.
Stage2Result train_stage2(const std::vector<datagen::InstructionSample>& instructions,
                          const synthface::SynthCorpus& corpus,
                          const std::filesystem::path& encoder_checkpoint,
                          const Stage2Config& cfg, const std::filesystem::path& out_dir,
                          const Stage2Options& options = {});

/// Mean ar_loss of the reasoner over samples (with their features).
double mean_ar_loss(const Reasoner& reasoner,
                    const std::vector<const datagen::InstructionSample*>& samples,
                    const std::vector<const VisualFeatures*>& features, int batch_size);

struct LoadedReasoner {
  Reasoner reasoner;
  nlohmann::json manifest;
};

void save_reasoner(const std::filesystem::path& path, Reasoner& reasoner,
                   const nlohmann::json& extra);
/// Throws ConfigError if the file is not a reasoner checkpoint.
LoadedReasoner load_reasoner(const std::filesystem::path& path);

}  // namespace dfx::reasoning
