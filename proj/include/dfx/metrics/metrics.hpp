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

// Detection and caption-quality metrics.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dfx::metrics {

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from exact integer counts. Throws
/// ContractError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// The same statistic as an exact fraction (2 * wins + ties) / (2 * P * N).
struct AucFraction {
  unsigned long long numerator = 0;
  unsigned long long denominator = 0;
};
AucFraction auc_fraction(std::span<const double> scores, std::span<const int> labels);

/// Fraction of samples with (score >= threshold) == label.
double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

using Tokens = std::vector<std::string>;

/// Lowercase; whitespace and punctuation separate tokens; punctuation dropped.
Tokens tokenize(std::string_view text);

struct CaptionItem {
  Tokens hypothesis;
  std::vector<Tokens> references;
};

inline constexpr double kRougeBeta = 1.2;
inline constexpr double kCiderSigma = 6.0;
inline constexpr double kBleuEpsilon = 1e-9;

/// Corpus BLEU with uniform weights over 1..4-grams and brevity penalty.
double bleu4(std::span<const CaptionItem> items);
/// Mean over items of the best-reference LCS F-measure.
double rouge_l(std::span<const CaptionItem> items);
/// Mean over items of the best-reference exact-match METEOR.
double meteor(std::span<const CaptionItem> items);
/// Mean over items of TF-IDF n-gram cosine with a Gaussian length penalty,
/// averaged over n = 1..4 and scaled by 10. Needs at least two items.
double cider(std::span<const CaptionItem> items);

/// METEOR of one hypothesis against one reference; exposed for tests.
struct MeteorDetail {
  int matches = 0;
  int chunks = 0;
  double score = 0;
};
MeteorDetail meteor_single(const Tokens& hyp, const Tokens& ref);

double vqa_average(double bleu4, double cider, double rouge_l, double meteor);

struct Prediction {
  std::string image_id;
  double score = 0;
  int label = 0;
  std::optional<std::string> hypothesis;
  std::vector<std::string> references;
};

std::vector<Prediction> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path,
                       std::span<const Prediction> predictions);

/// EvalReport JSON: detection metrics always, caption metrics when any
/// prediction carries a hypothesis and references (null otherwise).
nlohmann::json evaluate(std::span<const Prediction> predictions, double threshold = 0.5);

}  // namespace dfx::metrics
