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

// Procedural face-like images with localized, caption-describable forgery
// artifacts. Every sample is a pure function of (seed, index, label, kind).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfx::synthface {

enum class Label : std::uint8_t { kReal = 0, kFake = 1 };

enum class ArtifactKind : std::uint8_t {
  kNone,
  kBlendBoundary,
  kEyeAsymmetry,
  kTextureNoise,
  kMouthWarp,
};

inline constexpr ArtifactKind kFakeKinds[] = {
    ArtifactKind::kBlendBoundary, ArtifactKind::kEyeAsymmetry,
    ArtifactKind::kTextureNoise, ArtifactKind::kMouthWarp};

std::string_view to_string(Label label);
std::string_view to_string(ArtifactKind kind);
Label parse_label(std::string_view s);
ArtifactKind parse_artifact_kind(std::string_view s);

inline constexpr int kDefaultSide = 64;
inline constexpr int kChannels = 3;

struct LabeledImage {
  std::string id;
  int index = 0;
  int side = kDefaultSide;
  std::vector<float> pixels;  // side * side * 3, row-major, RGB interleaved
  Label label = Label::kReal;
  ArtifactKind artifact = ArtifactKind::kNone;

  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * side + x) * kChannels + c];
  }
};

/// Landmark layout shared by a real sample and its forged variants.
struct FaceGeometry {
  double cx, cy;          // face centre
  double rx, ry;          // face ellipse radii
  double eye_dx, eye_y;   // eyes at (cx -/+ eye_dx, eye_y)
  double mouth_y;         // mouth centre row
  int seam_row;           // centre row of the blend seam band
  static constexpr int kSeamHalfWidth = 3;  // band rows: |y - seam_row| < 3
};

FaceGeometry face_geometry(std::uint64_t seed, int index, int side = kDefaultSide);

/// Throws ContractError if (label, kind) is inconsistent.
LabeledImage make_sample(std::uint64_t seed, int index, Label label,
                         ArtifactKind kind, int side = kDefaultSide);

enum class Split : std::uint8_t { kTrain, kVal, kTest };
std::string_view to_string(Split split);
Split parse_split(std::string_view s);

struct SynthCorpus {
  std::uint64_t seed = 0;
  int side = kDefaultSide;
  std::vector<LabeledImage> samples;
  std::map<std::string, Split> split;

  std::vector<const LabeledImage*> in_split(Split s) const;
  const LabeledImage* find(const std::string& id) const;
};

/// n samples; even indices real, odd indices fake with kinds cycled. Real
/// and fake of each index pair share a split (hash of the pair key), so
/// every split is class balanced to within one sample.
SynthCorpus make_corpus(std::uint64_t seed, int n, int side = kDefaultSide);

/// Canonical byte serialization (metadata + raw float pixels).
std::string corpus_bytes(const SynthCorpus& corpus);

/// corpus.json plus one 16-bit RGB PNG per sample.
void save_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);
SynthCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace dfx::synthface
