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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"

#include "dfx/core/error.hpp"
#include "dfx/datagen/captions.hpp"
#include "dfx/objectives/losses.hpp"
#include "dfx/reasoning/stage2.hpp"
#include "dfx/train/trainer.hpp"

using namespace dfx::reasoning;
using dfx::Tensor;
namespace fs = std::filesystem;

namespace {

AssembledSequence<double> toy_sequence(int nv, int d, std::vector<int> q, std::vector<int> r,
                                       int max_seq = 256) {
  return assemble_sequence<double>(Tensor<double>(nv, d, 0.1), q, r, max_seq);
}

ToyLMConfig tiny_lm(int vocab = 12) {
  ToyLMConfig c;
  c.vocab_size = vocab;
  c.layers = 2;
  c.d_l = 8;
  c.heads = 2;
  c.max_seq = 32;
  c.mlp_ratio = 2;
  c.init_std = 0.3;
  return c;
}

// The projector -> LM -> ar_loss chain on a padded batch, with backward.
struct Chain {
  Projector<double> proj{ProjectorConfig{6, 8, 10}};
  ToyLM<double> lm{tiny_lm()};
  std::vector<Tensor<double>> feats;
  std::vector<std::vector<int>> q, r;

  explicit Chain(std::uint64_t seed) {
    dfx::Rng rng(seed);
    proj.init(rng, 0.4);
    lm.init(rng);
    std::mt19937_64 g(seed + 1);
    for (int i = 0; i < 3; ++i) {
      Tensor<double> f(4, 6);
      dfx::testing::fill_normal(f, g);
      feats.push_back(f);
    }
    q = {{5, 6}, {7}, {5, 8, 9}};
    r = {{10, 11, 6}, {9}, {}};
  }

  double loss(bool backward) {
    Tensor<double> x(12, 6);
    for (int i = 0; i < 3; ++i) std::copy_n(feats[i].data(), 24, x.row(4 * i));
    typename Projector<double>::Cache pc;
    const auto vis = proj.forward(x, &pc);
    std::vector<AssembledSequence<double>> seqs;
    int width = 0;
    for (int i = 0; i < 3; ++i) {
      Tensor<double> v(4, 8);
      std::copy_n(vis.row(4 * i), 32, v.data());
      seqs.push_back(assemble_sequence<double>(v, q[i], r[i], 32));
      width = std::max(width, seqs.back().length());
    }
    std::vector<const AssembledSequence<double>*> ptrs;
    for (auto& s : seqs) ptrs.push_back(&s);
    const auto emb = lm.embed_batch(ptrs, width);
    typename ToyLM<double>::Cache cache;
    const auto logits = lm.forward(emb, 3, width, &cache);
    Tensor<double> dl;
    const double l = ar_loss(logits, ptrs, width, &dl);
    if (backward) {
      Tensor<double> dx;
      lm.backward(cache, dl, dx, true);
      lm.accumulate_token_grads(ptrs, width, dx);
      Tensor<double> dvis(12, 8);
      for (int i = 0; i < 3; ++i)
        for (int v = 0; v < 4; ++v) std::copy_n(dx.row(i * width + 1 + v), 8, dvis.row(4 * i + v));
      proj.backward(pc, dvis, nullptr);
    }
    return l;
  }
};

dfx::train::TrainConfig tiny_stage1() {
  dfx::train::TrainConfig c;
  c.vision.patch_size = 16;
  c.vision.dim = 16;
  c.vision.layers = 2;
  c.vision.heads = 2;
  c.vision.mlp_ratio = 2;
  c.vision.head_layers = 1;
  c.text.dim = 16;
  c.text.heads = 2;
  c.text.layers = 1;
  c.text.buckets = 512;
  c.batch_size = 8;
  c.epochs = 2;
  c.warmup_steps = 2;
  c.lr_base = 1e-3;
  return c;
}

Stage2Config tiny_stage2() {
  Stage2Config c;
  c.projector = {16, 16, 32};
  c.lm.d_l = 16;
  c.lm.heads = 2;
  c.lm.layers = 1;
  c.lm.max_seq = 96;
  c.lm.mlp_ratio = 2;
  c.batch_size = 8;
  c.epochs_projector = 1;
  c.epochs_joint = 3;
  c.lr_joint = 3e-3;
  c.warmup_steps = 3;
  c.eval_samples = 48;
  return c;
}

struct Fixture {
  fs::path dir = fs::temp_directory_path() / "dfx_test_reasoning";
  dfx::synthface::SynthCorpus corpus = dfx::synthface::make_corpus(4, 80);
  std::vector<dfx::datagen::InstructionSample> instructions;
  fs::path encoder;
  Fixture() {
    fs::remove_all(dir);
    std::vector<const dfx::synthface::LabeledImage*> all;
    for (const auto& s : corpus.samples) all.push_back(&s);
    dfx::datagen::StubClient stub;
    const auto caps = dfx::datagen::generate_captions(all, stub).records;
    instructions = dfx::datagen::build_instruction_samples(caps);
    encoder = dfx::train::train_stage1(corpus, &caps, tiny_stage1(), dir / "stage1").best_checkpoint;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("word tokens, vocabulary and decoding") {
  CHECK(lm_words("This image is fake. The eyes, oddly-shaped!") ==
        std::vector<std::string>{"this", "image", "is", "fake", ".", "the", "eyes", ",", "oddly",
                                 "shaped", "!"});
  std::vector<dfx::datagen::InstructionSample> s{
      {"a", "Is it real?", "This image is real. The eyes are fine.", {}},
      {"b", "Is it real?", "This image is fake. The eyes are odd.", {}}};
  const auto v = Vocabulary::build(s, 512);
  CHECK(v.token(Vocabulary::kBos) == "<bos>");
  CHECK(v.id("eyes") >= Vocabulary::kNumSpecial);
  CHECK(v.id("zebra") == Vocabulary::kUnk);
  const auto ids = v.encode("This image is fake. The eyes are odd.");
  CHECK(v.decode(ids) == "This image is fake. The eyes are odd.");
  CHECK(Vocabulary::from_json(v.to_json()).encode("the eyes") == v.encode("the eyes"));
  const auto small = Vocabulary::build(s, 8);
  CHECK(small.size() == 8);
  CHECK(small.id(".") != Vocabulary::kUnk);  // most frequent tokens survive the cap
  CHECK_THROWS_AS(Vocabulary::build(s, 5), dfx::ConfigError);
  CHECK_THROWS_AS(Vocabulary::from_json(nlohmann::json::array({"x"})), dfx::ConfigError);
}

TEST_CASE("verdict keyword rule") {
  CHECK(verdict("This image is fake. The eyes look odd.") == "fake");
  CHECK(verdict("This image is real. Nothing fake about the eyes.") == "real");
  CHECK(verdict("FAKE!") == "fake");
  CHECK(verdict("") == "real");
}

TEST_CASE("projector shapes, constant map and row independence") {
  Projector<double> p(ProjectorConfig{128, 256, 0});
  dfx::Rng rng(3);
  p.init(rng, 0.05);
  Tensor<double> patches(64, 128, 0.2);
  std::vector<double> e(128, -0.3);
  const auto out = project_tokens<double>(p, patches, e);
  CHECK(out.rows() == 65);
  CHECK(out.cols() == 256);

  // Row 0 depends on e only.
  Tensor<double> patches2 = patches;
  patches2(5, 7) += 1.0;
  const auto out2 = project_tokens<double>(p, patches2, e);
  for (int c = 0; c < 256; ++c) CHECK(out2(0, c) == out(0, c));
  std::vector<double> e2 = e;
  e2[3] += 1.0;
  const auto out3 = project_tokens<double>(p, patches, e2);
  bool changed = false;
  for (int c = 0; c < 256; ++c) changed |= out3(0, c) != out(0, c);
  CHECK(changed);

  for (auto* prm : p.parameters())
    if (prm->name.find("fc2.bias") == std::string::npos) prm->value.zero();
  for (int c = 0; c < 256; ++c) p.fc2.bias.value(0, c) = 0.01 * c;
  const auto flat = project_tokens<double>(p, patches, e);
  for (int r = 0; r < 65; r += 16)
    for (int c = 0; c < 256; ++c) CHECK(flat(r, c) == 0.01 * c);
  CHECK_THROWS_AS(project_tokens<double>(p, Tensor<double>(64, 100), e), dfx::ShapeError);
}

TEST_CASE("sequence layout and loss mask") {
  auto s = toy_sequence(65, 4, {5, 6, 7, 8, 9}, {10, 11, 12, 13, 14, 15, 16});
  CHECK(s.length() == 79);
  CHECK(std::accumulate(s.mask.begin(), s.mask.end(), 0) == 8);
  CHECK(std::accumulate(s.visual.begin(), s.visual.end(), 0) == 65);
  for (int p = 0; p < s.length(); ++p)
    if (s.visual[static_cast<std::size_t>(p)]) CHECK(s.mask[static_cast<std::size_t>(p)] == 0);
  CHECK(s.tokens.front() == Vocabulary::kBos);
  CHECK(s.tokens.back() == Vocabulary::kEos);
  CHECK(s.mask.back() == 1);

  auto empty = toy_sequence(65, 4, {5}, {});
  CHECK(std::accumulate(empty.mask.begin(), empty.mask.end(), 0) == 1);
  CHECK_THROWS_AS(toy_sequence(65, 4, {5, 6}, std::vector<int>(200, 9)), dfx::ContractError);
  CHECK_NOTHROW(toy_sequence(3, 4, {5}, {6}, 7));
  CHECK_THROWS_AS(toy_sequence(3, 4, {5}, {6}, 6), dfx::ContractError);
}

TEST_CASE("ar_loss closed forms") {
  const int v = 17;
  auto s = toy_sequence(3, 4, {5, 6}, {7, 8});
  // Uniform logits give ln V.
  Tensor<double> logits(s.length(), v, 0.25);
  CHECK(ar_loss(logits, s) == doctest::Approx(std::log(v)).epsilon(1e-12));

  // Near-certain targets give a loss near 0.
  Tensor<double> sharp(s.length(), v, 0.0);
  for (int p = 1; p < s.length(); ++p) sharp(p - 1, s.tokens[static_cast<std::size_t>(p)]) = 60.0;
  CHECK(ar_loss(sharp, s) < 1e-20);
  CHECK(ar_loss(sharp, s) >= 0);

  // Two-token response: mean of per-position NLLs; exp(-L * loss) is the
  // product of the teacher-forced conditionals.
  auto two = toy_sequence(2, 4, {5}, {9});  // response token 9 plus EOS
  std::mt19937_64 g(7);
  Tensor<double> lg(two.length(), v);
  dfx::testing::fill_normal(lg, g);
  auto nll_at = [&](int row, int target) {
    double m = lg(row, 0);
    for (int c = 1; c < v; ++c) m = std::max(m, lg(row, c));
    double z = 0;
    for (int c = 0; c < v; ++c) z += std::exp(lg(row, c) - m);
    return -(lg(row, target) - m - std::log(z));
  };
  const int n = two.length();
  const double a = nll_at(n - 3, 9), b = nll_at(n - 2, Vocabulary::kEos);
  CHECK(ar_loss(lg, two) == doctest::Approx((a + b) / 2).epsilon(1e-14));
  const double product = std::exp(-a) * std::exp(-b);
  CHECK(std::abs(std::exp(-2 * ar_loss(lg, two)) - product) < 1e-10);

  // Gradients at unmasked positions are exactly zero.
  Tensor<double> dl;
  ar_loss(lg, two, &dl);
  for (int p = 0; p + 1 < n; ++p)
    if (!two.mask[static_cast<std::size_t>(p + 1)])
      for (int c = 0; c < v; ++c) CHECK(dl(p, c) == 0.0);
  for (int c = 0; c < v; ++c) CHECK(dl(n - 1, c) == 0.0);
}

TEST_CASE("projector and language model gradients match finite differences") {
  for (std::uint64_t seed : {1u, 2u}) {
    Chain chain(seed);
    auto params = chain.proj.parameters();
    for (auto* p : chain.lm.parameters()) params.push_back(p);
    dfx::nn::zero_grads(params);
    chain.loss(true);
    CHECK(dfx::testing::max_param_grad_error(params, [&] { return chain.loss(false); }, 1e-5, 6) <
          1e-4);
  }
}

TEST_CASE("incremental decoding matches the full causal pass") {
  ToyLM<double> lm(tiny_lm());
  dfx::Rng rng(9);
  lm.init(rng);
  auto s = toy_sequence(3, 8, {5, 6}, {7, 8, 9});
  std::vector<const AssembledSequence<double>*> one{&s};
  const auto x = lm.embed_batch(one, s.length());
  const auto full = lm.forward(x, 1, s.length(), nullptr);
  auto st = lm.start();
  Tensor<double> head(6, 8);
  std::copy_n(x.data(), 48, head.data());
  const auto a = lm.step(head, st);
  for (int c = 0; c < 12; ++c) CHECK(a(5, c) == doctest::Approx(full(5, c)).epsilon(1e-12));
  for (int p = 6; p < s.length(); ++p) {
    Tensor<double> row(1, 8);
    std::copy_n(x.row(p), 8, row.data());
    const auto b = lm.step(row, st);
    for (int c = 0; c < 12; ++c) CHECK(b(0, c) == doctest::Approx(full(p, c)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(lm.step(Tensor<double>(40, 8), st), dfx::ContractError);
}

TEST_CASE("stage 2 freezing contracts, descent and checkpoint") {
  const auto& f = fixture();
  const auto cfg = tiny_stage2();
  const auto r = train_stage2(f.instructions, f.corpus, f.encoder, cfg, f.dir / "stage2");
  CHECK(r.encoder_checksum_before == r.encoder_checksum_after);
  CHECK(r.lm_checksum_after_substep1 == r.lm_checksum_before);
  CHECK(r.projector_checksum_after_substep1 != r.projector_checksum_before);
  CHECK(r.final_loss < r.initial_loss);
  CHECK(r.substep1_loss < r.initial_loss);
  CHECK(fs::exists(r.loss_log));

  auto loaded = load_reasoner(r.checkpoint);
  CHECK(loaded.manifest["encoder_checksum"] == dfx::hex64(r.encoder_checksum_before));
  auto det = dfx::train::load_detector(f.encoder);
  const auto test = f.corpus.in_split(dfx::synthface::Split::kTest);
  REQUIRE(!test.empty());
  const auto feats = extract_features(det.detector, det.config.ablation, test, 16);
  CHECK(feats[0].rows.rows() == 17);
  const auto g1 = loaded.reasoner.generate(feats[0], dfx::datagen::kDetectionQuestion, 12);
  const auto g2 = loaded.reasoner.generate(feats[0], dfx::datagen::kDetectionQuestion, 12);
  CHECK(g1.tokens == g2.tokens);
  CHECK(g1.tokens.size() <= 12u);
  CHECK((g1.verdict == "fake" || g1.verdict == "real"));
  CHECK(loaded.reasoner.generate(feats[0], dfx::datagen::kDetectionQuestion, 1).tokens.size() <= 1u);

  CHECK_THROWS_AS(load_reasoner(f.encoder), dfx::ConfigError);
  auto bad = cfg;
  bad.projector.d_v = 32;
  CHECK_THROWS_AS(train_stage2(f.instructions, f.corpus, f.encoder, bad, f.dir / "bad"),
                  dfx::ConfigError);
}

TEST_CASE("stage 2 with low-rank adapters keeps the base frozen until the merge") {
  const auto& f = fixture();
  auto cfg = tiny_stage2();
  cfg.lora_rank = 2;
  cfg.epochs_joint = 1;
  const auto r = train_stage2(f.instructions, f.corpus, f.encoder, cfg, f.dir / "lora");
  CHECK(r.final_loss < r.substep1_loss);
  auto loaded = load_reasoner(r.checkpoint);
  CHECK(dfx::nn::checksum(loaded.reasoner.lm().parameters()) != r.lm_checksum_before);
}

TEST_CASE("stage 2 config round trip and validation") {
  auto c = tiny_stage2();
  c.lora_rank = 4;
  const auto j = to_json(c);
  CHECK(to_json(stage2_config_from_json(j)) == j);
  auto bad = j;
  bad["lm"]["d_l"] = 32;
  CHECK_THROWS_AS(stage2_config_from_json(bad), dfx::ConfigError);
  bad = j;
  bad["stage2"]["epochs_projector"] = 0;
  bad["stage2"]["epochs_joint"] = 0;
  CHECK_THROWS_AS(stage2_config_from_json(bad), dfx::ConfigError);
}
