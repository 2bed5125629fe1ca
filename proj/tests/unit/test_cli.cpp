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

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "dfx/cli/cli.hpp"
#include "dfx/cli/plot.hpp"
#include "dfx/core/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int dfx_run(std::vector<std::string> args) {
  args.insert(args.begin(), "dfx");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return dfx::cli::run(static_cast<int>(argv.size()), argv.data());
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::string> kTiny = {
    "--vision.patch_size=16", "--vision.dim=16",     "--vision.layers=2",
    "--vision.heads=2",       "--vision.mlp_ratio=2", "--vision.head_layers=1",
    "--text.dim=16",          "--text.heads=2",       "--text.layers=1",
    "--text.buckets=512",     "--train.batch_size=8", "--train.epochs=2",
    "--train.warmup_steps=2", "--train.lr_base=1e-3"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("help exits 0 on every subcommand") {
  CHECK(dfx_run({"--help"}) == 0);
  for (const char* sub :
       {"synth", "datagen", "train-encoder", "train-reasoner", "eval", "generate", "report"})
    CHECK(dfx_run({sub, "--help"}) == 0);
}

TEST_CASE("usage errors exit 2, runtime errors exit 1") {
  CHECK(dfx_run({}) == 2);
  CHECK(dfx_run({"frobnicate"}) == 2);
  CHECK(dfx_run({"synth", "--out", "x", "--bogus", "1"}) == 2);
  CHECK(dfx_run({"synth"}) == 2);  // --out is required
  CHECK(dfx_run({"train-encoder", "--corpus", "c", "--out", "o", "--ablation", "half"}) == 2);
  CHECK(dfx_run({"train-encoder", "--corpus", "c", "--out", "o", "--train.nonsense=1"}) == 2);
  CHECK(dfx_run({"train-encoder", "--corpus", "c", "--out", "o", "--train.epochs=\"two\""}) == 2);
  CHECK(dfx_run({"datagen", "--corpus", "c", "--out", "o"}) == 2);  // no client chosen
  CHECK(dfx_run({"eval"}) == 2);
  const auto dir = fresh_dir("dfx_test_cli_errors");
  CHECK(dfx_run({"datagen", "--corpus", (dir / "missing").string(), "--out",
                 (dir / "o").string(), "--stub"}) == 1);
  CHECK(dfx_run({"eval", "--pred", (dir / "missing.jsonl").string()}) == 1);
}

TEST_CASE("override splitting") {
  const auto s = dfx::cli::split_overrides(
      {"--corpus", "c", "--train.epochs=2", "--loss.alpha", "0.5", "--other.x=1"},
      {"train", "loss"});
  CHECK(s.overrides == std::vector<std::string>{"train.epochs=2", "loss.alpha=0.5"});
  CHECK(s.rest == std::vector<std::string>{"--corpus", "c", "--other.x=1"});
  CHECK_THROWS_AS(dfx::cli::split_overrides({"--train.epochs"}, {"train"}), dfx::ConfigError);
}

TEST_CASE("manifest round trip") {
  dfx::cli::RunManifest m;
  m.command = "synth";
  m.argv = {"dfx", "synth"};
  m.config = {{"n", 3}};
  m.config_hash = "abc";
  m.seed = 7;
  m.started_at = dfx::cli::utc_now();
  m.finished_at = m.started_at;
  m.artifacts = {{"corpus", "corpus.json"}};
  const auto dir = fresh_dir("dfx_test_cli_manifest");
  dfx::cli::write_manifest(dir, m);
  const auto back = dfx::cli::read_manifest(dir);
  CHECK(back.command == "synth");
  CHECK(back.seed == 7);
  CHECK(back.config == m.config);
  CHECK(back.artifacts == m.artifacts);
  CHECK(m.started_at.size() == 20);
  CHECK(m.started_at.back() == 'Z');
  CHECK_THROWS_AS(dfx::cli::read_manifest(dir / "nope"), dfx::IoError);
}

TEST_CASE("svg charts") {
  const auto t = dfx::cli::nice_ticks(0, 1, 5);
  REQUIRE(t.size() == 6);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == doctest::Approx(1.0));
  const auto svg = dfx::cli::line_chart("t", "x", "y", {{"a", {0, 1, 2}, {1, 0.5, 0.25}}});
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(dfx::cli::line_chart("t<&>", "x", "y", {{"a", {0}, {1}}}).find("t&lt;&amp;&gt;") !=
        std::string::npos);
  CHECK_THROWS_AS(dfx::cli::line_chart("t", "x", "y", {{"a", {}, {}}}), dfx::ContractError);
  const auto bars = dfx::cli::bar_chart("b", "AUC", {{"none", 0.9, 0.01}, {"full", 0.95, 0}}, 0.8, 1.0);
  CHECK(bars.find("<rect") != std::string::npos);
}

TEST_CASE("end to end on a tiny configuration") {
  const auto root = fresh_dir("dfx_test_cli_e2e");
  const auto corpus = (root / "corpus").string();
  const auto data = (root / "data").string();
  const auto enc = (root / "enc").string();

  REQUIRE(dfx_run({"synth", "--seed", "3", "--n", "80", "--out", corpus}) == 0);
  CHECK(fs::exists(fs::path(corpus) / "corpus.json"));
  const auto synth_m = read_json(fs::path(corpus) / "manifest.json");
  CHECK(synth_m["command"] == "synth");
  CHECK(synth_m["seed"] == 3);
  CHECK(synth_m["checksums"].contains("corpus"));

  REQUIRE(dfx_run({"datagen", "--corpus", corpus, "--out", data, "--stub"}) == 0);
  for (const char* f : {"captions.jsonl", "caption_errors.jsonl", "instructions.jsonl", "manifest.json"})
    CHECK(fs::exists(fs::path(data) / f));

  const std::vector<std::string> base = {"train-encoder", "--corpus", corpus, "--captions",
                                         data + "/captions.jsonl", "--out", enc};
  REQUIRE(dfx_run(cat(cat(base, {"--ablation", "none"}), kTiny)) == 0);
  REQUIRE(dfx_run(cat(cat(base, {"--ablation", "full"}), kTiny)) == 0);
  for (const char* run : {"none-seed0", "full-seed0"}) {
    const auto dir = fs::path(enc) / run;
    for (const char* f : {"best.ckpt", "final.ckpt", "metrics.jsonl", "summary.json", "manifest.json"})
      CHECK(fs::exists(dir / f));
    CHECK(read_json(dir / "manifest.json")["config"]["vision"]["dim"] == 16);
  }
  const auto table = read_json(fs::path(enc) / "comparison.json");
  REQUIRE(table["rows"].size() == 2);
  CHECK(table["rows"][0]["preset"] == "none");
  CHECK(table["rows"][1]["preset"] == "full");
  CHECK(fs::exists(fs::path(enc) / "comparison.md"));
  CHECK(read_json(fs::path(enc) / "manifest.json")["command"] == "train-encoder");

  SUBCASE("a run is reproducible from its manifest") {
    const auto again = (root / "again").string();
    REQUIRE(dfx_run({"train-encoder", "--corpus", corpus, "--captions", data + "/captions.jsonl",
                     "--out", again, "--config", enc + "/full-seed0/manifest.json"}) == 0);
    CHECK(read_json(fs::path(again) / "full-seed0" / "manifest.json")["checksums"]["final"] ==
          read_json(fs::path(enc) / "full-seed0" / "manifest.json")["checksums"]["final"]);
  }

  SUBCASE("reasoner, eval, generate and report") {
    const auto rsn = (root / "rsn").string();
    REQUIRE(dfx_run({"train-reasoner", "--encoder", enc + "/full-seed0/final.ckpt", "--corpus",
                     corpus, "--instructions", data + "/instructions.jsonl", "--out", rsn,
                     "--lm.d_l=32", "--projector.d_l=32", "--lm.heads=2", "--lm.layers=1",
                     "--stage2.epochs_joint=2"}) == 0);
    const auto rm = read_json(fs::path(rsn) / "manifest.json");
    CHECK(rm["config"]["projector"]["d_v"] == 16);  // taken from the encoder
    const auto summary = read_json(fs::path(rsn) / "stage2_summary.json");
    CHECK(summary["final_loss"].get<double>() < summary["initial_loss"].get<double>());

    const auto preds = (root / "preds.jsonl").string();
    const auto ev = (root / "ev").string();
    REQUIRE(dfx_run({"eval", "--reasoner", rsn + "/reasoner.ckpt", "--corpus", corpus,
                     "--instructions", data + "/instructions.jsonl", "--write-pred", preds,
                     "--out", ev}) == 0);
    const auto report = read_json(fs::path(ev) / "report.json");
    CHECK(report.contains("auc"));
    CHECK(report["bleu4"].is_number());
    CHECK(report.contains("text_verdict_accuracy"));
    CHECK(fs::exists(fs::path(ev) / "manifest.json"));
    const auto ev2 = (root / "ev2").string();
    REQUIRE(dfx_run({"eval", "--pred", preds, "--out", ev2}) == 0);
    CHECK(read_json(fs::path(ev2) / "report.json")["auc"] == report["auc"]);

    CHECK(dfx_run({"generate", "--reasoner", rsn + "/reasoner.ckpt", "--corpus", corpus,
                   "--image-id", "img-00000"}) == 0);
    CHECK(dfx_run({"generate", "--reasoner", rsn + "/reasoner.ckpt", "--corpus", corpus,
                   "--split", "test", "--encoder", enc + "/none-seed0/final.ckpt"}) == 1);
    CHECK(dfx_run({"generate", "--reasoner", rsn + "/reasoner.ckpt", "--corpus", corpus}) == 2);

    const auto rep = (root / "rep").string();
    REQUIRE(dfx_run({"report", "--run", enc, "--run", rsn, "--out", rep}) == 0);
    for (const char* f : {"stage1_loss.svg", "val_auc.svg", "stage2_loss.svg", "ablation_auc.svg",
                          "comparison.json", "comparison.md", "manifest.json"})
      CHECK(fs::exists(fs::path(rep) / f));
  }
}
