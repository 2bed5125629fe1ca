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

// Stage-1 training: one optimizer step over a batch, the epoch loop with
// validation, checkpointing and the ablation sweep.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfx/datagen/captions.hpp"
#include "dfx/encoder/detector.hpp"
#include "dfx/encoder/text_encoder.hpp"
#include "dfx/nn/adam.hpp"
#include "dfx/synthface/synthface.hpp"
#include "dfx/train/config.hpp"

namespace dfx::train {

struct StepLosses {
  double total = 0, cls = 0, cst = 0, kl = 0;
};

struct StepReport {
  int step = 0;
  double lr = 0;
  StepLosses losses;
  double gate_w1_mean = 0, gate_w2_mean = 0;
  double grad_norm = 0;  // before clipping
  double temperature = 0;
};

struct TrainItem {
  const synthface::LabeledImage* image = nullptr;
  std::string sentence;  // ignored without contrastive learning
};

/// Sentences available per image id, used for contrastive pairs.
using CaptionIndex = std::map<std::string, std::vector<std::string>>;
CaptionIndex index_captions(const std::vector<datagen::CaptionRecord>& records);

/// Owns the detector, the frozen text encoder and the optimizer.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  encoder::Detector<float>& detector() { return detector_; }
  const encoder::TextEncoder& text_encoder() const { return text_; }
  /// Number of times the text encoder was asked for an embedding.
  std::int64_t text_calls() const { return text_calls_; }

  /// One forward/backward/update. lr is the learning rate for this step.
  /// Throws NumericError with the per-term losses if any loss is non-finite.
  StepReport train_step(const std::vector<TrainItem>& batch, double lr);

  /// Classifier logits with the deterministic embedding (z = mu).
  std::vector<double> scores(const std::vector<const synthface::LabeledImage*>& images) const;

 private:
  TrainConfig cfg_;
  encoder::Detector<float> detector_;
  encoder::TextEncoder text_;
  std::unique_ptr<nn::Adam<float>> adam_;
  Rng noise_;
  int step_ = 0;
  std::int64_t text_calls_ = 0;
};

/// Classifier logits of a detector in evaluation mode.
std::vector<double> detector_scores(const encoder::Detector<float>& det, const AblationFlags& flags,
                                    const std::vector<const synthface::LabeledImage*>& images,
                                    int batch_size);
double split_auc(const encoder::Detector<float>& det, const AblationFlags& flags,
                 const std::vector<const synthface::LabeledImage*>& images, int batch_size);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;  // mean total loss over the epoch
  double val_auc = 0;
};

struct Stage1Result {
  std::filesystem::path best_checkpoint, final_checkpoint, metrics_log;
  std::vector<EpochRecord> epochs;
  std::vector<StepReport> steps;
  int best_epoch = 0;
  double best_val_auc = 0;
  double test_auc_best = 0;   // held-out split, best-validation checkpoint
  double test_auc_final = 0;  // held-out split, final checkpoint
  std::uint64_t final_checksum = 0;
  std::uint64_t text_checksum_before = 0, text_checksum_after = 0;
};

struct Stage1Options {
  std::function<void(const StepReport&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains on the corpus train split, validates every epoch, writes
/// best.ckpt, final.ckpt and metrics.jsonl into out_dir. captions may be
/// null when contrastive learning is off; otherwise every train image needs
/// at least one sentence.
Stage1Result train_stage1(const synthface::SynthCorpus& corpus,
                          const std::vector<datagen::CaptionRecord>* captions,
                          const TrainConfig& cfg, const std::filesystem::path& out_dir,
                          const Stage1Options& options = {});

struct LoadedDetector {
  TrainConfig config;
  encoder::Detector<float> detector;
  nlohmann::json manifest;
};

LoadedDetector load_detector(const std::filesystem::path& checkpoint);

/// Outcome of one stage-1 run, as listed in comparison tables.
struct RunSummary {
  std::string preset;
  std::uint64_t seed = 0;
  AblationFlags flags;
  double best_val_auc = 0;
  double test_auc = 0;        // best-validation checkpoint
  double test_auc_final = 0;  // final checkpoint
  std::string checksum;
  std::string dir;
};

RunSummary summarize(const Stage1Result& result, const TrainConfig& cfg,
                     const std::filesystem::path& dir);
nlohmann::json to_json(const RunSummary& s);
RunSummary run_summary_from_json(const nlohmann::json& j);

/// One row per configuration (presets in canonical order, then custom
/// ones), with the mean and sample deviation of held-out AUC over seeds.
nlohmann::json comparison_table(const std::vector<RunSummary>& runs);
/// Writes comparison.json and a markdown rendering, comparison.md.
void write_comparison(const std::filesystem::path& dir, const nlohmann::json& table);

/// Runs every preset for every seed (run dirs out_dir/<preset>-seed<s>) and
/// returns the comparison table, also written with write_comparison.
nlohmann::json run_ablation(const synthface::SynthCorpus& corpus,
                            const std::vector<datagen::CaptionRecord>& captions,
                            const TrainConfig& base, const std::vector<std::string>& presets,
                            const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir,
                            const Stage1Options& options = {});

}  // namespace dfx::train
