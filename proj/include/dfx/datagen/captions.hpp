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

// Label-conditioned caption generation, sentence splitting and
// instruction-pair synthesis.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfx/synthface/synthface.hpp"

namespace dfx::datagen {

enum class Region { kEyes, kMouth, kChin, kHair, kNose, kSkin, kOther };

/// Keyword priority used by split_caption; the first match wins.
inline constexpr Region kRegionPriority[] = {Region::kEyes, Region::kMouth, Region::kChin,
                                             Region::kHair, Region::kNose, Region::kSkin};

std::string_view to_string(Region r);
Region parse_region(std::string_view s);

struct Sentence {
  std::string text;
  Region region = Region::kOther;
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct CaptionRecord {
  std::string image_id;
  synthface::Label label = synthface::Label::kReal;
  std::string paragraph;
  std::vector<Sentence> sentences;
  std::string prompt_hash;
  friend bool operator==(const CaptionRecord&, const CaptionRecord&) = default;
};

struct CaptionFailure {
  std::string image_id;
  int attempts = 0;
  std::string message;
};

enum class InstructionSource { kGenerated, kFixture };
std::string_view to_string(InstructionSource s);

struct InstructionSample {
  std::string image_id;
  std::string question;
  std::string response;
  InstructionSource source = InstructionSource::kGenerated;
  friend bool operator==(const InstructionSample&, const InstructionSample&) = default;
};

inline constexpr std::string_view kDetectionQuestion = "Is this image real or fake? Explain.";

std::string build_caption_prompt(synthface::Label label);
std::string prompt_hash(std::string_view prompt);

/// Splits on '.', '!' and '?', keeping the terminator, and tags each
/// sentence with a region. Throws DegenerateInputError on blank input.
std::vector<Sentence> split_caption(std::string_view paragraph);
Region detect_region(std::string_view sentence);

struct CaptionRequest {
  std::string image_id;
  synthface::Label label = synthface::Label::kReal;
  synthface::ArtifactKind artifact = synthface::ArtifactKind::kNone;
  std::string prompt;
  std::string image_png;  // empty unless the client asks for pixels
};

class MllmClient {
 public:
  virtual ~MllmClient() = default;
  /// Returns the caption paragraph or throws on failure.
  virtual std::string describe(const CaptionRequest& request) = 0;
  virtual bool needs_image() const { return true; }
  virtual std::string name() const = 0;
};

/// Offline client: fixed two-sentence templates per artifact kind, variant
/// picked by a hash of the image id. Thread-safe.
class StubClient : public MllmClient {
 public:
  std::string describe(const CaptionRequest& request) override;
  bool needs_image() const override { return false; }
  std::string name() const override { return "stub"; }
};

struct HttpClientOptions {
  std::string endpoint;  // e.g. http://localhost:8080/v1/chat/completions
  std::string api_key_env = "DFX_API_KEY";
  std::string model = "llama-3.2-vision";
  double timeout_seconds = 60;
};

/// Chat-completion style HTTP client. Sends the prompt and the image as a
/// base64 PNG; accepts either {"text": ...} or an OpenAI-style
/// choices[0].message.content reply.
class HttpClient : public MllmClient {
 public:
  explicit HttpClient(HttpClientOptions options);
  std::string describe(const CaptionRequest& request) override;
  std::string name() const override { return "http:" + options_.model; }

  /// The JSON body sent for a request; exposed for tests.
  std::string request_body(const CaptionRequest& request) const;

 private:
  HttpClientOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Extracts the caption text from a chat-completion response body.
std::string parse_completion(std::string_view body);

struct GenerateOptions {
  int retries = 3;          // extra attempts after the first
  int backoff_ms = 500;     // doubled after each failed attempt
  int concurrency = 4;
  double max_failure_fraction = 0.5;
};

struct CaptionResult {
  std::vector<CaptionRecord> records;  // sorted by image_id
  std::vector<CaptionFailure> failures;
};

/// One record per image. Failed images (after retries) are reported in
/// failures; throws Error if more than max_failure_fraction fail.
CaptionResult generate_captions(const std::vector<const synthface::LabeledImage*>& images,
                                MllmClient& client, const GenerateOptions& options = {});

std::vector<InstructionSample> build_instruction_samples(
    const std::vector<CaptionRecord>& records);

void write_captions(const std::filesystem::path& path, const std::vector<CaptionRecord>& records);
std::vector<CaptionRecord> read_captions(const std::filesystem::path& path);
void write_failures(const std::filesystem::path& path,
                    const std::vector<CaptionFailure>& failures);
void write_instructions(const std::filesystem::path& path,
                        const std::vector<InstructionSample>& samples);
std::vector<InstructionSample> read_instructions(const std::filesystem::path& path);

}  // namespace dfx::datagen
