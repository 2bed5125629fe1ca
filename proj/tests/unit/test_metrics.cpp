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
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "json.hpp"

#include "dfx/core/error.hpp"
#include "dfx/metrics/metrics.hpp"

using namespace dfx::metrics;

namespace {

CaptionItem item(const char* hyp, std::initializer_list<const char*> refs) {
  CaptionItem it;
  it.hypothesis = tokenize(hyp);
  for (const char* r : refs) it.references.push_back(tokenize(r));
  return it;
}

// O(P * N) pairwise count, the definition of the statistic.
std::pair<unsigned long long, unsigned long long> brute_auc(const std::vector<double>& s,
                                                            const std::vector<int>& y) {
  unsigned long long twice = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
      }
  return {twice, 2 * pairs};
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1}) == 0.5);
  CHECK(auc(std::vector<double>{0.8, 0.6, 0.4, 0.2}, std::vector<int>{1, 0, 1, 0}) == 0.75);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}),
                  dfx::ContractError);
}

TEST_CASE("auc equals the pairwise oracle, is rank based and flips") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng() % 40);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = static_cast<double>(rng() % 7);  // many ties
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    const auto f = auc_fraction(s, y);
    const auto b = brute_auc(s, y);
    CHECK(f.numerator * b.second == b.first * f.denominator);
    std::vector<double> mono(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) mono[i] = std::exp(3 * s[i]) - 5;
    CHECK(auc(mono, y) == auc(s, y));
    std::vector<int> flipped(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
    CHECK(auc(s, flipped) == doctest::Approx(1 - auc(s, y)).epsilon(1e-15));
  }
}

TEST_CASE("accuracy threshold convention") {
  CHECK(accuracy(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
  CHECK(accuracy(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) == 0.0);
  CHECK(accuracy(std::vector<double>{0.6, 0.6}, std::vector<int>{1, 0}) == 0.5);
  CHECK(accuracy(std::vector<double>{0.5}, std::vector<int>{1}) == 1.0);
}

TEST_CASE("tokenization") {
  CHECK(tokenize("The EYES, are mis-aligned!") ==
        Tokens{"the", "eyes", "are", "mis", "aligned"});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("bleu4 fixtures") {
  std::vector<CaptionItem> same{item("a b c d e", {"a b c d e"})};
  CHECK(bleu4(same) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<CaptionItem> disjoint{item("a b c d", {"e f g h"})};
  CHECK(bleu4(disjoint) <= 1e-6);
  std::vector<CaptionItem> brevity{item("a b c d", {"a b c d e"})};
  CHECK(std::abs(bleu4(brevity) - std::exp(1.0 - 5.0 / 4.0)) < 1e-12);
  CHECK(std::abs(bleu4(brevity) - 0.7788) < 1e-4);
}

TEST_CASE("rouge_l fixtures") {
  std::vector<CaptionItem> same{item("a b c d", {"a b c d"})};
  CHECK(rouge_l(same) == doctest::Approx(1.0));
  std::vector<CaptionItem> disjoint{item("a b", {"c d"})};
  CHECK(rouge_l(disjoint) == 0.0);
  std::vector<CaptionItem> swap{item("a b c d", {"a c b d"})};
  CHECK(std::abs(rouge_l(swap) - 0.75) < 1e-12);
  std::vector<CaptionItem> best{item("a b c d", {"x y", "a b c d"})};
  CHECK(rouge_l(best) == doctest::Approx(1.0));
}

TEST_CASE("meteor fixtures") {
  const auto d = meteor_single(tokenize("a b c d"), tokenize("a b c d"));
  CHECK(d.matches == 4);
  CHECK(d.chunks == 1);
  CHECK(std::abs(d.score - 0.9921875) < 1e-12);
  CHECK(meteor_single(tokenize("a b"), tokenize("c d")).score == 0.0);
  const auto r = meteor_single(tokenize("b a d c"), tokenize("a b c d"));
  CHECK(r.chunks > 1);
  CHECK(r.score < d.score);
  for (int m = 1; m <= 6; ++m) {
    Tokens t;
    for (int i = 0; i < m; ++i) t.push_back("w" + std::to_string(i));
    CHECK(std::abs(meteor_single(t, t).score - (1 - 0.5 / (m * m * m))) < 1e-12);
  }
}

TEST_CASE("cider fixtures") {
  std::vector<CaptionItem> zero{item("x y z", {"a b c"}), item("a b", {"d e"})};
  CHECK(cider(zero) == 0.0);
  std::vector<CaptionItem> one{item("a b", {"a b"})};
  CHECK_THROWS_AS(cider(one), dfx::ContractError);

  std::ifstream is(std::string(DFX_TEST_DATA_DIR) + "/oracles/cider_fixture.json");
  REQUIRE(is);
  const auto fx = nlohmann::json::parse(is);
  std::vector<CaptionItem> items;
  for (const auto& it : fx.at("items")) {
    CaptionItem c;
    c.hypothesis = tokenize(it.at("hypothesis").get<std::string>());
    for (const auto& r : it.at("references")) c.references.push_back(tokenize(r.get<std::string>()));
    items.push_back(std::move(c));
  }
  CHECK(std::abs(cider(items) - fx.at("cider").get<double>()) < 1e-6);
  CHECK(cider(items) >= 0);
}

TEST_CASE("metrics are maximal on identical and zero on disjoint captions") {
  std::vector<CaptionItem> same{item("the eyes are uneven", {"the eyes are uneven"}),
                                item("skin looks smooth here", {"skin looks smooth here"})};
  CHECK(bleu4(same) == doctest::Approx(1.0));
  CHECK(rouge_l(same) == doctest::Approx(1.0));
  CHECK(meteor(same) == doctest::Approx(1 - 0.5 / 64));
  std::vector<CaptionItem> disjoint{item("p q r s", {"a b c d"}), item("t u v w", {"e f g h"})};
  CHECK(bleu4(disjoint) <= 1e-6);
  CHECK(rouge_l(disjoint) == 0.0);
  CHECK(meteor(disjoint) == 0.0);
  CHECK(cider(disjoint) == 0.0);
  CHECK(cider(same) == cider(same));
}

TEST_CASE("vqa average") {
  CHECK(std::abs(vqa_average(0.4980, 3.3050, 0.6950, 0.4010) - 1.2248) < 5e-4);
  CHECK(std::abs(vqa_average(0.4075, 2.0567, 0.6085, 0.3463) - 0.85475) < 1e-12);
  CHECK(vqa_average(0, 0, 0, 0) == 0.0);
}

TEST_CASE("prediction files round trip into a report") {
  const auto path = std::filesystem::temp_directory_path() / "dfx_test_preds.jsonl";
  std::vector<Prediction> preds(4);
  for (int i = 0; i < 4; ++i) {
    preds[static_cast<std::size_t>(i)].image_id = "img-" + std::to_string(i);
    preds[static_cast<std::size_t>(i)].score = 0.2 * i;
    preds[static_cast<std::size_t>(i)].label = i >= 2;
  }
  preds[0].hypothesis = "This image is real.";
  preds[0].references = {"This image is real."};
  preds[3].hypothesis = "This image is fake. The eyes are uneven.";
  preds[3].references = {"This image is fake. The eyes look misaligned."};
  write_predictions(path, preds);
  const auto back = read_predictions(path);
  REQUIRE(back.size() == 4);
  CHECK(back[3].hypothesis == preds[3].hypothesis);
  const auto report = evaluate(back);
  CHECK(report.at("auc") == 1.0);
  CHECK(report.at("accuracy") == 0.75);
  CHECK(report.at("n") == 4);
  CHECK(report.at("cider").is_number());
  CHECK(report.at("config_hash").get<std::string>().size() == 16);
  std::filesystem::remove(path);
}
