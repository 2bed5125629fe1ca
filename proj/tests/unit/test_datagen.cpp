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

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "dfx/core/error.hpp"
#include "dfx/datagen/captions.hpp"
#include "dfx/synthface/synthface.hpp"

using namespace dfx::datagen;
using dfx::synthface::ArtifactKind;
using dfx::synthface::Label;

namespace {

std::string squash(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<const dfx::synthface::LabeledImage*> pointers(const dfx::synthface::SynthCorpus& c) {
  std::vector<const dfx::synthface::LabeledImage*> out;
  for (const auto& s : c.samples) out.push_back(&s);
  return out;
}

class FlakyClient : public MllmClient {
 public:
  explicit FlakyClient(int fail_first) : fail_first_(fail_first) {}
  std::string describe(const CaptionRequest& r) override {
    if (calls_++ < fail_first_) throw dfx::IoError("transient");
    return "The " + std::string(r.label == Label::kFake ? "mouth is odd." : "skin is fine.");
  }
  bool needs_image() const override { return false; }
  std::string name() const override { return "flaky"; }
  std::atomic<int> calls_{0};

 private:
  int fail_first_;
};

class FailOddClient : public MllmClient {
 public:
  std::string describe(const CaptionRequest& r) override {
    if (r.image_id.back() % 2) throw dfx::IoError("down");
    return "Fine.";
  }
  bool needs_image() const override { return false; }
  std::string name() const override { return "fail-odd"; }
};

}  // namespace

TEST_CASE("caption prompt template") {
  const std::string fake = build_caption_prompt(Label::kFake);
  const std::string real = build_caption_prompt(Label::kReal);
  CHECK(fake ==
        "Explain why the face attributes (e.g., eyes, mouth, chin, hair, nose, and others) make "
        "this image look fake");
  CHECK(real.size() >= 4);
  CHECK(real.substr(real.size() - 9) == "look real");
  CHECK(fake.substr(0, fake.size() - 4) == real.substr(0, real.size() - 4));
  CHECK(prompt_hash(fake) != prompt_hash(real));
}

TEST_CASE("split_caption examples") {
  auto s = split_caption("The eyes are misaligned. The mouth looks blurry.");
  REQUIRE(s.size() == 2);
  CHECK(s[0] == Sentence{"The eyes are misaligned.", Region::kEyes});
  CHECK(s[1] == Sentence{"The mouth looks blurry.", Region::kMouth});

  s = split_caption("Nothing notable here.");
  REQUIRE(s.size() == 1);
  CHECK(s[0].region == Region::kOther);

  s = split_caption("The eyes and mouth clash!");
  REQUIRE(s.size() == 1);
  CHECK(s[0].region == Region::kEyes);
  CHECK(split_caption("The MOUTH and the Chin")[0].region == Region::kMouth);
  CHECK(split_caption("Her Hair is neat")[0].region == Region::kHair);

  s = split_caption("Really?! The nose is odd... trailing words");
  REQUIRE(s.size() == 3);
  CHECK(s[0].text == "Really?!");
  CHECK(s[1] == Sentence{"The nose is odd...", Region::kNose});
  CHECK(s[2].text == "trailing words");

  CHECK_THROWS_AS(split_caption(""), dfx::DegenerateInputError);
  CHECK_THROWS_AS(split_caption("   \n"), dfx::DegenerateInputError);
}

TEST_CASE("split_caption reconstructs the paragraph") {
  const char* paragraphs[] = {"A. B! C?", "  The skin is smooth.   The chin is sharp!",
                              "no terminator at all", "Two.. Three!? end"};
  for (const char* p : paragraphs) {
    std::string joined;
    for (const auto& s : split_caption(p)) {
      CHECK(!s.text.empty());
      CHECK(std::string_view(p).find(s.text) != std::string_view::npos);
      joined += s.text + " ";
    }
    CHECK(squash(joined) == squash(p));
  }
}

TEST_CASE("stub client templates") {
  StubClient stub;
  const auto corpus = dfx::synthface::make_corpus(11, 40);
  for (const auto& img : corpus.samples) {
    CaptionRequest r{img.id, img.label, img.artifact, build_caption_prompt(img.label), {}};
    const std::string text = stub.describe(r);
    CHECK(text == stub.describe(r));
    CHECK(split_caption(text).size() == 2);
    const std::string l = lower(text);
    if (img.label == Label::kReal) {
      for (const char* bad : {"blurry", "misaligned", "unnatural", "distorted"})
        CHECK(l.find(bad) == std::string::npos);
    } else {
      bool negative = false;
      for (const char* bad : {"blurry", "misaligned", "unnatural", "distorted"})
        negative |= l.find(bad) != std::string::npos;
      CHECK(negative);
    }
    if (img.artifact == ArtifactKind::kEyeAsymmetry) CHECK(l.find("eyes") != std::string::npos);
    if (img.artifact == ArtifactKind::kMouthWarp) CHECK(l.find("mouth") != std::string::npos);
    if (img.artifact == ArtifactKind::kBlendBoundary) CHECK(l.find("chin") != std::string::npos);
    if (img.artifact == ArtifactKind::kTextureNoise) CHECK(l.find("skin") != std::string::npos);
  }
  CaptionRequest bad{"x", Label::kReal, ArtifactKind::kMouthWarp, "", {}};
  CHECK_THROWS_AS(stub.describe(bad), dfx::ContractError);
}

TEST_CASE("generate_captions with the stub") {
  const auto corpus = dfx::synthface::make_corpus(5, 100);
  StubClient stub;
  GenerateOptions opt;
  opt.concurrency = 3;
  const auto result = generate_captions(pointers(corpus), stub, opt);
  REQUIRE(result.records.size() == 100);
  CHECK(result.failures.empty());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& r = result.records[i];
    ids.insert(r.image_id);
    if (i > 0) CHECK(result.records[i - 1].image_id < r.image_id);
    const auto* img = corpus.find(r.image_id);
    REQUIRE(img != nullptr);
    CHECK(r.label == img->label);
    CHECK(r.prompt_hash == prompt_hash(build_caption_prompt(img->label)));
  }
  CHECK(ids.size() == 100);

  // Thread count does not change the output.
  opt.concurrency = 1;
  CHECK(generate_captions(pointers(corpus), stub, opt).records == result.records);
}

TEST_CASE("retries and failure threshold") {
  const auto corpus = dfx::synthface::make_corpus(5, 4);
  std::vector<const dfx::synthface::LabeledImage*> one{&corpus.samples[0]};
  GenerateOptions opt;
  opt.backoff_ms = 1;
  opt.concurrency = 1;

  FlakyClient recover(3);
  auto ok = generate_captions(one, recover, opt);
  CHECK(ok.records.size() == 1);
  CHECK(recover.calls_ == 4);

  FlakyClient dead(100);
  CHECK_THROWS_AS(generate_captions(one, dead, opt), dfx::Error);
  CHECK(dead.calls_ == 4);

  // Half of the images fail: recorded, pipeline continues.
  FailOddClient half;
  auto res = generate_captions(pointers(corpus), half, opt);
  CHECK(res.records.size() == 2);
  REQUIRE(res.failures.size() == 2);
  CHECK(res.failures[0].attempts == 4);
  CHECK(res.failures[0].message == "down");

  opt.max_failure_fraction = 0.4;
  CHECK_THROWS_AS(generate_captions(pointers(corpus), half, opt), dfx::Error);
}

TEST_CASE("instruction samples") {
  CaptionRecord r;
  r.image_id = "img-1";
  r.label = Label::kFake;
  r.paragraph = "The eyes are odd. Nothing else. The mouth is warped.";
  r.sentences = split_caption(r.paragraph);
  auto s = build_instruction_samples({r});
  REQUIRE(s.size() == 3);
  CHECK(s[0].question == "Is this image real or fake? Explain.");
  CHECK(s[0].response ==
        "This image is fake. The eyes are odd. Nothing else. The mouth is warped.");
  CHECK(s[1].question == "Describe the eyes in this image.");
  CHECK(s[1].response == "The eyes are odd.");
  CHECK(s[2].question == "Describe the mouth in this image.");

  r.label = Label::kReal;
  r.sentences.clear();
  s = build_instruction_samples({r});
  REQUIRE(s.size() == 1);
  CHECK(s[0].response == "This image is real.");
  CHECK_THROWS_AS(build_instruction_samples({}), dfx::ContractError);
}

TEST_CASE("jsonl round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "dfx_test_datagen";
  std::filesystem::remove_all(dir);
  const auto corpus = dfx::synthface::make_corpus(9, 12);
  StubClient stub;
  const auto records = generate_captions(pointers(corpus), stub).records;
  write_captions(dir / "captions.jsonl", records);
  CHECK(read_captions(dir / "captions.jsonl") == records);
  const auto samples = build_instruction_samples(records);
  write_instructions(dir / "instructions.jsonl", samples);
  CHECK(read_instructions(dir / "instructions.jsonl") == samples);

  std::ofstream(dir / "bad.jsonl") << R"({"image_id":"a","question":"","response":"x"})" << "\n";
  CHECK_THROWS_AS(read_instructions(dir / "bad.jsonl"), dfx::ContractError);
  std::ofstream(dir / "broken.jsonl") << "{not json\n";
  CHECK_THROWS_AS(read_captions(dir / "broken.jsonl"), dfx::IoError);
  CHECK_THROWS_AS(read_captions(dir / "missing.jsonl"), dfx::IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("completion parsing") {
  CHECK(parse_completion(R"({"text":"The eyes."})") == "The eyes.");
  CHECK(parse_completion(R"({"choices":[{"message":{"content":"The chin."}}]})") == "The chin.");
  CHECK_THROWS_AS(parse_completion("nope"), dfx::IoError);
  CHECK_THROWS_AS(parse_completion(R"({"text":"  "})"), dfx::IoError);
  CHECK_THROWS_AS(parse_completion(R"({"choices":[]})"), dfx::IoError);
  CHECK_THROWS_AS(HttpClient({"not a url"}), dfx::ConfigError);
}

TEST_CASE("http client against a local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  nlohmann::json seen_body;
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"content":"The mouth is warped. It looks fake."}}]})",
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("DFX_TEST_KEY", "sekrit", 1);
  HttpClientOptions o;
  o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
  o.api_key_env = "DFX_TEST_KEY";
  o.timeout_seconds = 5;
  HttpClient client(o);

  const auto corpus = dfx::synthface::make_corpus(3, 4);
  std::vector<const dfx::synthface::LabeledImage*> one{&corpus.samples[1]};
  GenerateOptions g;
  g.backoff_ms = 1;
  const auto res = generate_captions(one, client, g);
  server.stop();
  th.join();

  REQUIRE(res.records.size() == 1);
  CHECK(hits == 2);
  CHECK(res.records[0].sentences.size() == 2);
  CHECK(res.records[0].sentences[0].region == Region::kMouth);
  CHECK(seen_auth == "Bearer sekrit");
  CHECK(seen_body.at("model") == o.model);
  const auto& content = seen_body.at("messages").at(0).at("content");
  CHECK(content.at(1).at("text") == build_caption_prompt(Label::kFake));
  const std::string url = content.at(0).at("image_url").at("url");
  CHECK(url.rfind("data:image/png;base64,iVBOR", 0) == 0);
}
