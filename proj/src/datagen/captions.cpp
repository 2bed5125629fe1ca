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

#include "dfx/datagen/captions.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"
#include "dfx/synthface/png_io.hpp"

namespace dfx::datagen {

using synthface::ArtifactKind;
using synthface::Label;

std::string_view to_string(Region r) {
  switch (r) {
    case Region::kEyes: return "eyes";
    case Region::kMouth: return "mouth";
    case Region::kChin: return "chin";
    case Region::kHair: return "hair";
    case Region::kNose: return "nose";
    case Region::kSkin: return "skin";
    case Region::kOther: return "other";
  }
  return "other";
}

Region parse_region(std::string_view s) {
  for (auto r : kRegionPriority)
    if (to_string(r) == s) return r;
  if (s == "other") return Region::kOther;
  throw ContractError("unknown region '" + std::string(s) + "'");
}

std::string_view to_string(InstructionSource s) {
  return s == InstructionSource::kGenerated ? "generated" : "fixture";
}

std::string build_caption_prompt(Label label) {
  return "Explain why the face attributes (e.g., eyes, mouth, chin, hair, nose, and "
         "others) make this image look " +
         std::string(synthface::to_string(label));
}

std::string prompt_hash(std::string_view prompt) { return hex64(fnv1a64(prompt)); }

Region detect_region(std::string_view sentence) {
  std::string lower(sentence);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto r : kRegionPriority)
    if (lower.find(to_string(r)) != std::string::npos) return r;
  return Region::kOther;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<Sentence> split_caption(std::string_view paragraph) {
  std::vector<Sentence> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto t = trim(paragraph.substr(start, end - start));
    if (!t.empty()) {
      const Region r = detect_region(t);
      out.push_back({std::move(t), r});
    }
    start = end;
  };
  for (std::size_t i = 0; i < paragraph.size(); ++i) {
    const char c = paragraph[i];
    if (c == '.' || c == '!' || c == '?') {
      // Keep runs such as "?!" or "..." attached to the same sentence.
      std::size_t j = i + 1;
      while (j < paragraph.size() &&
             (paragraph[j] == '.' || paragraph[j] == '!' || paragraph[j] == '?'))
        ++j;
      flush(j);
      i = j - 1;
    }
  }
  flush(paragraph.size());
  if (out.empty()) throw DegenerateInputError("split_caption: empty paragraph");
  return out;
}

// ---- stub client -------------------------------------------------------------

namespace {

struct Template {
  const char* first;
  const char* second;
};

const Template kRealTemplates[] = {
    {"The eyes are symmetric and evenly shaped.",
     "The skin has a smooth and consistent texture."},
    {"The mouth has a natural shape and even color.",
     "The chin blends smoothly into the rest of the face."},
    {"The hair line sits evenly above the forehead.",
     "The eyes and the mouth are well proportioned."},
};
const Template kBlendTemplates[] = {
    {"The chin shows a visible seam where the face was blended.",
     "The color band across the chin looks unnatural."},
    {"A distorted blending boundary runs across the chin.",
     "The lower chin edge looks misaligned and unnatural."},
};
const Template kEyeTemplates[] = {
    {"The eyes are asymmetric and the right one looks distorted.",
     "The eyes appear misaligned and unnatural."},
    {"The eyes do not match in size and look unnatural.",
     "The right side of the eyes looks blurry and distorted."},
};
const Template kTextureTemplates[] = {
    {"The skin on the cheeks has a noisy, unnatural texture.",
     "The skin looks blurry and distorted around the cheeks."},
    {"The skin texture is grainy and unnatural.",
     "Dark blotches make the skin look distorted."},
};
const Template kMouthTemplates[] = {
    {"The mouth is warped into a wavy, distorted shape.",
     "The lips around the mouth look unnatural and blurry."},
    {"The mouth looks distorted and zigzagged.",
     "The outline of the mouth appears misaligned."},
};

template <std::size_t N>
const Template& pick(const Template (&t)[N], std::string_view id) {
  return t[fnv1a64(id) % N];
}

}  // namespace

std::string StubClient::describe(const CaptionRequest& r) {
  if ((r.label == Label::kReal) != (r.artifact == ArtifactKind::kNone))
    throw ContractError("stub client: label and artifact kind disagree for " + r.image_id);
  const Template* t = nullptr;
  switch (r.artifact) {
    case ArtifactKind::kNone: t = &pick(kRealTemplates, r.image_id); break;
    case ArtifactKind::kBlendBoundary: t = &pick(kBlendTemplates, r.image_id); break;
    case ArtifactKind::kEyeAsymmetry: t = &pick(kEyeTemplates, r.image_id); break;
    case ArtifactKind::kTextureNoise: t = &pick(kTextureTemplates, r.image_id); break;
    case ArtifactKind::kMouthWarp: t = &pick(kMouthTemplates, r.image_id); break;
  }
  return std::string(t->first) + " " + t->second;
}

// ---- orchestration -----------------------------------------------------------

CaptionResult generate_captions(const std::vector<const synthface::LabeledImage*>& images,
                                MllmClient& client, const GenerateOptions& options) {
  if (options.retries < 0 || options.concurrency < 1)
    throw ConfigError("retries must be >= 0 and concurrency >= 1");
  const std::size_t n = images.size();
  std::vector<std::optional<CaptionRecord>> records(n);
  std::vector<std::optional<CaptionFailure>> failures(n);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& img = *images[i];
      CaptionRequest req;
      req.image_id = img.id;
      req.label = img.label;
      req.artifact = img.artifact;
      req.prompt = build_caption_prompt(img.label);
      if (client.needs_image())
      {
        const auto png =
            synthface::encode_png(synthface::RgbImage{img.side, img.side, img.pixels}, 8);
        req.image_png.assign(png.begin(), png.end());
      }
      int delay = options.backoff_ms;
      std::string last_error;
      int attempts = 0;
      for (; attempts <= options.retries; ++attempts) {
        if (attempts > 0) {
          std::this_thread::sleep_for(std::chrono::milliseconds(delay));
          delay *= 2;
        }
        try {
          const std::string paragraph = client.describe(req);
          CaptionRecord rec;
          rec.image_id = img.id;
          rec.label = img.label;
          rec.paragraph = paragraph;
          rec.sentences = split_caption(paragraph);
          rec.prompt_hash = prompt_hash(req.prompt);
          records[i] = std::move(rec);
          break;
        } catch (const std::exception& e) {
          last_error = e.what();
        }
      }
      if (!records[i]) failures[i] = CaptionFailure{img.id, attempts, last_error};
    }
  };
  const int workers = static_cast<int>(std::min<std::size_t>(
      static_cast<std::size_t>(options.concurrency), std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  CaptionResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i]) result.records.push_back(std::move(*records[i]));
    if (failures[i]) result.failures.push_back(std::move(*failures[i]));
  }
  auto by_id = [](const auto& a, const auto& b) { return a.image_id < b.image_id; };
  std::sort(result.records.begin(), result.records.end(), by_id);
  std::sort(result.failures.begin(), result.failures.end(), by_id);
  if (n > 0 && static_cast<double>(result.failures.size()) >
                   options.max_failure_fraction * static_cast<double>(n))
    throw Error("caption generation aborted: " + std::to_string(result.failures.size()) +
                " of " + std::to_string(n) + " images failed; last error: " +
                result.failures.back().message);
  return result;
}

std::vector<InstructionSample> build_instruction_samples(
    const std::vector<CaptionRecord>& records) {
  if (records.empty()) throw ContractError("build_instruction_samples: no records");
  std::vector<InstructionSample> out;
  for (const auto& r : records) {
    std::string response = "This image is " + std::string(synthface::to_string(r.label)) + ".";
    for (const auto& s : r.sentences) response += " " + s.text;
    out.push_back({r.image_id, std::string(kDetectionQuestion), response,
                   InstructionSource::kGenerated});
    for (const auto& s : r.sentences) {
      if (s.region == Region::kOther) continue;
      out.push_back({r.image_id,
                     "Describe the " + std::string(to_string(s.region)) + " in this image.",
                     s.text, InstructionSource::kGenerated});
    }
  }
  return out;
}

// ---- files -------------------------------------------------------------------

namespace {

template <typename F>
void read_jsonl(const std::filesystem::path& path, F&& each) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      each(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

}  // namespace

void write_captions(const std::filesystem::path& path, const std::vector<CaptionRecord>& records) {
  auto os = open_out(path);
  for (const auto& r : records) {
    nlohmann::json sentences = nlohmann::json::array();
    for (const auto& s : r.sentences)
      sentences.push_back({{"text", s.text}, {"region", to_string(s.region)}});
    os << nlohmann::json{{"image_id", r.image_id},
                         {"label", synthface::to_string(r.label)},
                         {"paragraph", r.paragraph},
                         {"sentences", sentences},
                         {"prompt_hash", r.prompt_hash}}
              .dump()
       << "\n";
  }
}

std::vector<CaptionRecord> read_captions(const std::filesystem::path& path) {
  std::vector<CaptionRecord> out;
  read_jsonl(path, [&](const nlohmann::json& j) {
    CaptionRecord r;
    r.image_id = j.at("image_id").get<std::string>();
    r.label = synthface::parse_label(j.at("label").get<std::string>());
    r.paragraph = j.at("paragraph").get<std::string>();
    for (const auto& s : j.at("sentences"))
      r.sentences.push_back({s.at("text").get<std::string>(),
                             parse_region(s.at("region").get<std::string>())});
    r.prompt_hash = j.value("prompt_hash", std::string());
    out.push_back(std::move(r));
  });
  return out;
}

void write_failures(const std::filesystem::path& path,
                    const std::vector<CaptionFailure>& failures) {
  auto os = open_out(path);
  for (const auto& f : failures)
    os << nlohmann::json{{"image_id", f.image_id}, {"attempts", f.attempts}, {"error", f.message}}
              .dump()
       << "\n";
}

void write_instructions(const std::filesystem::path& path,
                        const std::vector<InstructionSample>& samples) {
  auto os = open_out(path);
  for (const auto& s : samples)
    os << nlohmann::json{{"image_id", s.image_id},
                         {"question", s.question},
                         {"response", s.response},
                         {"source", to_string(s.source)}}
              .dump()
       << "\n";
}

std::vector<InstructionSample> read_instructions(const std::filesystem::path& path) {
  std::vector<InstructionSample> out;
  read_jsonl(path, [&](const nlohmann::json& j) {
    InstructionSample s;
    s.image_id = j.at("image_id").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.response = j.at("response").get<std::string>();
    const auto src = j.value("source", std::string("generated"));
    if (src != "generated" && src != "fixture")
      throw ContractError("unknown instruction source '" + src + "'");
    s.source = src == "fixture" ? InstructionSource::kFixture : InstructionSource::kGenerated;
    if (s.question.empty() || s.response.empty())
      throw ContractError("instruction for " + s.image_id + " has an empty field");
    out.push_back(std::move(s));
  });
  return out;
}

}  // namespace dfx::datagen
