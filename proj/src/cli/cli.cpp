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

#include "dfx/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "dfx/cli/plot.hpp"
#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"
#include "dfx/datagen/captions.hpp"
#include "dfx/metrics/metrics.hpp"
#include "dfx/nn/checkpoint.hpp"
#include "dfx/nn/param.hpp"
#include "dfx/reasoning/stage2.hpp"
#include "dfx/reasoning/vocab.hpp"
#include "dfx/synthface/synthface.hpp"
#include "dfx/train/config.hpp"
#include "dfx/train/trainer.hpp"

namespace dfx::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad command line; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kEncoderSections = {"train", "loss", "vision", "text"};
const std::vector<std::string> kReasonerSections = {"stage2", "projector", "lm"};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("bad JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// A config file may be a bare config or a run manifest, whose "config"
// section is then used. This is what makes runs re-invokable.
json load_config_patch(const fs::path& path) {
  json j = read_json_file(path);
  if (j.is_object() && j.contains("command") && j.contains("config")) return j["config"];
  return j;
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    try {
      train::apply_override(doc, o);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
}

bool touched(const json& patch, const std::string& section, const std::string& key) {
  return patch.is_object() && patch.contains(section) && patch[section].is_object() &&
         patch[section].contains(key);
}

class ManifestScope {
 public:
  ManifestScope(std::string command, const std::vector<std::string>& argv) {
    m_.command = std::move(command);
    m_.argv = argv;
    m_.started_at = utc_now();
  }
  RunManifest& get() { return m_; }
  void set_config(const json& config) {
    m_.config = config;
    m_.config_hash = train::config_hash(config);
  }
  void finish(const fs::path& dir) {
    m_.finished_at = utc_now();
    write_manifest(dir, m_);
  }

 private:
  RunManifest m_;
};

int encoder_width(const fs::path& checkpoint) {
  const auto m = nn::read_checkpoint_manifest(checkpoint);
  try {
    return m.at("config").at("vision").at("dim").get<int>();
  } catch (const json::exception&) {
    throw ConfigError("not a detector checkpoint: " + checkpoint.string());
  }
}

std::vector<const synthface::LabeledImage*> all_images(const synthface::SynthCorpus& c) {
  std::vector<const synthface::LabeledImage*> out;
  for (const auto& s : c.samples) out.push_back(&s);
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::uint64_t seed = 0;
  int n = 2000;
  int side = synthface::kDefaultSide;
  std::string out;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv) {
  ManifestScope ms("synth", argv);
  const json config = {{"seed", a.seed}, {"n", a.n}, {"side", a.side}};
  ms.set_config(config);
  ms.get().seed = a.seed;
  const auto corpus = synthface::make_corpus(a.seed, a.n, a.side);
  synthface::save_corpus(corpus, a.out);
  ms.get().artifacts = {{"corpus", "corpus.json"}};
  ms.get().checksums = {{"corpus", hex64(fnv1a64(synthface::corpus_bytes(corpus)))}};
  ms.finish(a.out);
  std::cerr << "wrote " << corpus.samples.size() << " images to " << a.out << "\n";
  return 0;
}

// -------------------------------------------------------------- datagen

struct DatagenArgs {
  std::string corpus, out;
  bool stub = false;
  std::string endpoint;
  std::string model = "llama-3.2-vision";
  std::string api_key_env = "DFX_API_KEY";
  double timeout = 60;
  int concurrency = 4;
  int retries = 3;
  int backoff_ms = 500;
};

int cmd_datagen(const DatagenArgs& a, const std::vector<std::string>& argv) {
  if (a.stub == !a.endpoint.empty()) throw UsageError("datagen needs exactly one of --stub or --endpoint");
  ManifestScope ms("datagen", argv);
  const auto corpus = synthface::load_corpus(a.corpus);
  std::unique_ptr<datagen::MllmClient> client;
  json config = {{"corpus", fs::absolute(a.corpus).string()},
                 {"concurrency", a.concurrency},
                 {"retries", a.retries},
                 {"backoff_ms", a.backoff_ms}};
  if (a.stub) {
    client = std::make_unique<datagen::StubClient>();
    config["client"] = "stub";
  } else {
    client = std::make_unique<datagen::HttpClient>(datagen::HttpClientOptions{
        a.endpoint, a.api_key_env, a.model, a.timeout});
    config["client"] = {{"endpoint", a.endpoint},
                        {"model", a.model},
                        {"api_key_env", a.api_key_env},
                        {"timeout_seconds", a.timeout}};
  }
  ms.set_config(config);
  ms.get().seed = corpus.seed;

  datagen::GenerateOptions opts;
  opts.concurrency = a.concurrency;
  opts.retries = a.retries;
  opts.backoff_ms = a.backoff_ms;
  const auto result = datagen::generate_captions(all_images(corpus), *client, opts);
  const auto instructions = datagen::build_instruction_samples(result.records);

  const fs::path out = a.out;
  fs::create_directories(out);
  datagen::write_captions(out / "captions.jsonl", result.records);
  datagen::write_failures(out / "caption_errors.jsonl", result.failures);
  datagen::write_instructions(out / "instructions.jsonl", instructions);
  ms.get().artifacts = {{"captions", "captions.jsonl"},
                        {"errors", "caption_errors.jsonl"},
                        {"instructions", "instructions.jsonl"}};
  ms.finish(out);
  std::cerr << result.records.size() << " captions, " << result.failures.size()
            << " failures, " << instructions.size() << " instruction samples\n";
  return 0;
}

// -------------------------------------------------------- train-encoder

struct EncoderArgs {
  std::string corpus, captions, out, config, ablation;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

int cmd_train_encoder(const EncoderArgs& a, const std::vector<std::string>& overrides,
                      const std::vector<std::string>& argv) {
  ManifestScope ms("train-encoder", argv);
  json doc = train::to_json(train::TrainConfig{});
  if (!a.config.empty()) doc.merge_patch(load_config_patch(a.config));
  auto all = a.sets;
  all.insert(all.end(), overrides.begin(), overrides.end());
  apply_overrides(doc, all);
  if (a.seed) doc["train"]["seed"] = *a.seed;
  const auto base = train::train_config_from_json(doc);

  std::vector<std::string> presets;
  if (a.ablation == "sweep")
    presets = train::preset_names();
  else if (!a.ablation.empty())
    presets = {a.ablation};
  else
    presets = {train::preset_name(base.ablation)};
  const auto seeds = a.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : a.seeds;

  const auto corpus = synthface::load_corpus(a.corpus);
  std::vector<datagen::CaptionRecord> captions;
  if (!a.captions.empty()) captions = datagen::read_captions(a.captions);

  const fs::path out = a.out;
  fs::create_directories(out);
  json run_dirs = json::array();
  for (const auto& name : presets) {
    for (const auto seed : seeds) {
      train::TrainConfig cfg = base;
      if (name != "custom") cfg.ablation = train::preset(name);
      cfg.seed = seed;
      const std::string dir_name = name + "-seed" + std::to_string(seed);
      const fs::path dir = out / dir_name;
      ManifestScope run_ms("train-encoder", argv);
      run_ms.set_config(train::to_json(cfg));
      run_ms.get().seed = seed;
      std::cerr << "== " << dir_name << "\n";
      train::Stage1Options opts;
      opts.on_epoch = [](const train::EpochRecord& e) {
        std::cerr << "epoch " << e.epoch << " train_loss=" << e.train_loss
                  << " val_auc=" << e.val_auc << "\n";
      };
      const auto res = train::train_stage1(corpus, a.captions.empty() ? nullptr : &captions,
                                           cfg, dir, opts);
      const auto summary = train::summarize(res, cfg, dir);
      write_text(dir / "summary.json", train::to_json(summary).dump(2) + "\n");
      std::cerr << "test_auc=" << summary.test_auc << " (final " << summary.test_auc_final
                << ")\n";
      run_ms.get().artifacts = {{"best", "best.ckpt"},
                                {"final", "final.ckpt"},
                                {"metrics", "metrics.jsonl"},
                                {"summary", "summary.json"}};
      run_ms.get().checksums = {{"final", hex64(res.final_checksum)},
                                {"text_encoder_before", hex64(res.text_checksum_before)},
                                {"text_encoder_after", hex64(res.text_checksum_after)}};
      run_ms.finish(dir);
      run_dirs.push_back(dir_name);
    }
  }

  // The comparison covers every run in the output directory, so separate
  // invocations (one preset each) accumulate into one table.
  std::vector<train::RunSummary> runs;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_directory() && fs::exists(e.path() / "summary.json")) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries)
    runs.push_back(train::run_summary_from_json(read_json_file(p / "summary.json")));
  auto table = train::comparison_table(runs);
  table["config"] = train::to_json(base);
  train::write_comparison(out, table);

  ms.set_config(train::to_json(base));
  ms.get().seed = base.seed;
  ms.get().artifacts = {{"comparison", "comparison.json"},
                        {"comparison_table", "comparison.md"},
                        {"runs", run_dirs}};
  ms.finish(out);
  return 0;
}

// ------------------------------------------------------- train-reasoner

struct ReasonerArgs {
  std::string encoder, corpus, instructions, out, config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

int cmd_train_reasoner(const ReasonerArgs& a, const std::vector<std::string>& overrides,
                       const std::vector<std::string>& argv) {
  ManifestScope ms("train-reasoner", argv);
  json doc = reasoning::to_json(reasoning::Stage2Config{});
  json patch = json::object();
  if (!a.config.empty()) patch = load_config_patch(a.config);
  doc.merge_patch(patch);
  auto all = a.sets;
  all.insert(all.end(), overrides.begin(), overrides.end());
  apply_overrides(doc, all);
  bool dv_set = touched(patch, "projector", "d_v");
  for (const auto& o : all) dv_set = dv_set || o.rfind("projector.d_v=", 0) == 0;
  if (!dv_set) {
    // Follow the encoder width unless the user pinned it.
    doc["projector"]["d_v"] = encoder_width(a.encoder);
  }
  if (a.seed) doc["stage2"]["seed"] = *a.seed;
  const auto cfg = reasoning::stage2_config_from_json(doc);

  const auto corpus = synthface::load_corpus(a.corpus);
  const auto instructions = datagen::read_instructions(a.instructions);
  reasoning::Stage2Options opts;
  int last_substep = 0;
  opts.on_step = [&](const reasoning::Stage2Step& s) {
    if (s.substep != last_substep) {
      std::cerr << "sub-step " << s.substep << "\n";
      last_substep = s.substep;
    }
  };
  const fs::path out = a.out;
  const auto res = reasoning::train_stage2(instructions, corpus, a.encoder, cfg, out, opts);
  const json summary = {{"initial_loss", res.initial_loss},
                        {"substep1_loss", res.substep1_loss},
                        {"final_loss", res.final_loss},
                        {"train_samples", res.train_samples}};
  write_text(out / "stage2_summary.json", summary.dump(2) + "\n");
  std::cerr << "ar_loss " << res.initial_loss << " -> " << res.substep1_loss << " -> "
            << res.final_loss << "\n";

  ms.set_config(reasoning::to_json(cfg));
  ms.get().seed = cfg.seed;
  ms.get().artifacts = {{"reasoner", "reasoner.ckpt"},
                        {"metrics", "stage2_metrics.jsonl"},
                        {"summary", "stage2_summary.json"},
                        {"encoder", fs::absolute(a.encoder).string()}};
  ms.get().checksums = {{"encoder_before", hex64(res.encoder_checksum_before)},
                        {"encoder_after", hex64(res.encoder_checksum_after)},
                        {"lm_before", hex64(res.lm_checksum_before)},
                        {"lm_after_substep1", hex64(res.lm_checksum_after_substep1)},
                        {"projector_before", hex64(res.projector_checksum_before)},
                        {"projector_after_substep1", hex64(res.projector_checksum_after_substep1)}};
  ms.finish(out);
  return 0;
}

// ----------------------------------------------------------------- eval

std::vector<const synthface::LabeledImage*> select_images(const synthface::SynthCorpus& corpus,
                                                          const std::string& split,
                                                          const std::vector<std::string>& ids) {
  std::vector<const synthface::LabeledImage*> out;
  if (!ids.empty()) {
    for (const auto& id : ids) {
      const auto* img = corpus.find(id);
      if (!img) throw ContractError("unknown image id " + id);
      out.push_back(img);
    }
    return out;
  }
  if (split == "all") return all_images(corpus);
  return corpus.in_split(synthface::parse_split(split));
}

struct Verified {
  train::LoadedDetector encoder;
  std::string checksum;
};

// Loads the reasoner's encoder (or an override) and checks it is the one the
// reasoner was trained against.
Verified load_reasoner_encoder(const json& reasoner_manifest, const std::string& override_path) {
  const std::string path = override_path.empty()
                               ? reasoner_manifest.value("encoder_checkpoint", std::string())
                               : override_path;
  if (path.empty()) throw ConfigError("reasoner checkpoint does not name its encoder");
  Verified v{train::load_detector(path), {}};
  v.checksum = hex64(nn::checksum(v.encoder.detector.parameters()));
  const auto expected = reasoner_manifest.value("encoder_checksum", std::string());
  if (v.checksum != expected)
    throw ConfigError("encoder " + path + " has checksum " + v.checksum +
                      ", the reasoner was trained with " + expected);
  return v;
}

struct EvalArgs {
  std::string pred, encoder, reasoner, corpus, instructions, write_pred, out;
  std::string split = "test";
  double threshold = 0.5;
  int max_new = 0;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const bool model_mode = !a.encoder.empty() || !a.reasoner.empty();
  if (a.pred.empty() == !model_mode)
    throw UsageError("eval needs either --pred or --encoder/--reasoner");
  ManifestScope ms("eval", argv);
  std::vector<metrics::Prediction> preds;
  json extra = json::object();
  json config = {{"threshold", a.threshold}};

  if (!a.pred.empty()) {
    preds = metrics::read_predictions(a.pred);
    config["pred"] = fs::absolute(a.pred).string();
  } else {
    if (a.corpus.empty()) throw UsageError("eval --encoder/--reasoner needs --corpus");
    if (!a.reasoner.empty() && a.instructions.empty())
      throw UsageError("eval --reasoner needs --instructions for the references");
    const auto corpus = synthface::load_corpus(a.corpus);
    const auto images = select_images(corpus, a.split, {});
    config["corpus"] = fs::absolute(a.corpus).string();
    config["split"] = a.split;

    std::optional<reasoning::LoadedReasoner> reasoner;
    std::optional<train::LoadedDetector> encoder;
    if (!a.reasoner.empty()) {
      reasoner.emplace(reasoning::load_reasoner(a.reasoner));
      auto v = load_reasoner_encoder(reasoner->manifest, a.encoder);
      encoder.emplace(std::move(v.encoder));
      config["reasoner"] = fs::absolute(a.reasoner).string();
    } else {
      encoder.emplace(train::load_detector(a.encoder));
    }
    config["encoder"] = encoder->manifest.value("config_hash", std::string());
    const auto features = reasoning::extract_features(encoder->detector, encoder->config.ablation,
                                                      images, encoder->config.eval_batch);

    std::map<std::string, std::vector<std::string>> refs;
    if (reasoner) {
      for (const auto& s : datagen::read_instructions(a.instructions))
        if (s.question == datagen::kDetectionQuestion) refs[s.image_id].push_back(s.response);
    }
    const int max_new = a.max_new > 0 ? a.max_new
                        : reasoner   ? reasoner->reasoner.config().max_new_tokens
                                     : 0;
    std::size_t verdict_right = 0, verdict_agree = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      metrics::Prediction p;
      p.image_id = images[i]->id;
      p.score = sigmoid(features[i].score);
      p.label = images[i]->label == synthface::Label::kFake ? 1 : 0;
      if (reasoner) {
        const auto g = reasoner->reasoner.generate(features[i], datagen::kDetectionQuestion, max_new);
        p.hypothesis = g.response;
        p.references = refs[p.image_id];
        const int v = g.verdict == "fake" ? 1 : 0;
        verdict_right += v == p.label;
        verdict_agree += v == (p.score >= a.threshold ? 1 : 0);
      }
      preds.push_back(std::move(p));
    }
    if (reasoner && !images.empty()) {
      const double n = static_cast<double>(images.size());
      extra["text_verdict_accuracy"] = static_cast<double>(verdict_right) / n;
      extra["text_classifier_agreement"] = static_cast<double>(verdict_agree) / n;
    }
    if (!a.write_pred.empty()) metrics::write_predictions(a.write_pred, preds);
  }

  json report = metrics::evaluate(preds, a.threshold);
  for (auto& [k, v] : extra.items()) report[k] = v;
  std::cout << report.dump(2) << std::endl;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "report.json", report.dump(2) + "\n");
    ms.set_config(config);
    ms.get().artifacts = {{"report", "report.json"}};
    ms.finish(a.out);
  }
  return 0;
}

// ------------------------------------------------------------- generate

struct GenerateArgs {
  std::string reasoner, corpus, encoder, split;
  std::vector<std::string> image_ids;
  std::string question{datagen::kDetectionQuestion};
  int max_new = 0;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.image_ids.empty() == a.split.empty())
    throw UsageError("generate needs exactly one of --image-id or --split");
  auto loaded = reasoning::load_reasoner(a.reasoner);
  auto v = load_reasoner_encoder(loaded.manifest, a.encoder);
  const auto corpus = synthface::load_corpus(a.corpus);
  const auto images = select_images(corpus, a.split, a.image_ids);
  const auto features = reasoning::extract_features(v.encoder.detector, v.encoder.config.ablation,
                                                    images, v.encoder.config.eval_batch);
  const int max_new = a.max_new > 0 ? a.max_new : loaded.reasoner.config().max_new_tokens;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto g = loaded.reasoner.generate(features[i], a.question, max_new);
    std::cout << json{{"image_id", images[i]->id},
                      {"question", a.question},
                      {"response", g.response},
                      {"verdict", g.verdict},
                      {"classifier_score", sigmoid(features[i].score)}}
                     .dump()
              << "\n";
  }
  std::cout.flush();
  return 0;
}

// --------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> runs;
  std::string comparison, out;
};

std::string run_label(const fs::path& dir) {
  auto name = dir.filename().string();
  if (name.empty()) name = dir.parent_path().filename().string();
  return name;
}

int cmd_report(const ReportArgs& a, const std::vector<std::string>& argv) {
  ManifestScope ms("report", argv);
  const fs::path out = a.out;
  fs::create_directories(out);

  // Expand each --run into the run directories below it (one level).
  std::vector<fs::path> stage1, stage2;
  std::optional<fs::path> comparison;
  if (!a.comparison.empty()) comparison = a.comparison;
  for (const auto& r : a.runs) {
    const fs::path dir = r;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + r);
    std::vector<fs::path> candidates = {dir};
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) children.push_back(e.path());
    std::sort(children.begin(), children.end());
    candidates.insert(candidates.end(), children.begin(), children.end());
    for (const auto& c : candidates) {
      if (fs::exists(c / "metrics.jsonl")) stage1.push_back(c);
      if (fs::exists(c / "stage2_metrics.jsonl")) stage2.push_back(c);
    }
    if (!comparison && fs::exists(dir / "comparison.json")) comparison = dir / "comparison.json";
  }
  if (stage1.empty() && stage2.empty() && !comparison)
    throw IoError("nothing to report: no metrics logs or comparison table found");

  json artifacts = json::object();
  if (!stage1.empty()) {
    std::vector<Series> loss, auc;
    for (const auto& dir : stage1) {
      Series l{run_label(dir), {}, {}}, v{run_label(dir), {}, {}};
      for (const auto& rec : read_jsonl(dir / "metrics.jsonl")) {
        if (rec.value("kind", "") == "step") {
          l.x.push_back(rec.at("step").get<double>());
          l.y.push_back(rec.at("loss_total").get<double>());
        } else if (rec.value("kind", "") == "epoch") {
          v.x.push_back(rec.at("epoch").get<double>());
          v.y.push_back(rec.at("val_auc").get<double>());
        }
      }
      loss.push_back(std::move(l));
      auc.push_back(std::move(v));
    }
    write_text(out / "stage1_loss.svg", line_chart("Stage 1 training loss", "step", "loss", loss));
    write_text(out / "val_auc.svg", line_chart("Validation AUC", "epoch", "AUC", auc));
    artifacts["stage1_loss"] = "stage1_loss.svg";
    artifacts["val_auc"] = "val_auc.svg";
  }
  if (!stage2.empty()) {
    std::vector<Series> loss;
    for (const auto& dir : stage2) {
      Series l{run_label(dir), {}, {}};
      for (const auto& rec : read_jsonl(dir / "stage2_metrics.jsonl")) {
        if (rec.value("kind", "") != "step") continue;
        l.x.push_back(static_cast<double>(l.x.size() + 1));
        l.y.push_back(rec.at("ar_loss").get<double>());
      }
      loss.push_back(std::move(l));
    }
    write_text(out / "stage2_loss.svg",
               line_chart("Stage 2 autoregressive loss", "step", "ar_loss", loss));
    artifacts["stage2_loss"] = "stage2_loss.svg";
  }
  if (comparison) {
    const auto table = read_json_file(*comparison);
    std::vector<Bar> bars;
    double lo = 1.0;
    for (const auto& row : table.at("rows")) {
      const double mean = row.at("test_auc_mean").get<double>();
      const double sd = row.value("test_auc_std", 0.0);
      bars.push_back({row.at("preset").get<std::string>(), mean, sd});
      lo = std::min(lo, mean - sd);
    }
    const double y_min = std::max(0.0, std::floor((lo - 0.02) * 20.0) / 20.0);
    write_text(out / "ablation_auc.svg",
               bar_chart("Held-out AUC by configuration", "AUC", bars, y_min, 1.0));
    fs::copy_file(*comparison, out / "comparison.json", fs::copy_options::overwrite_existing);
    const auto md = comparison->parent_path() / "comparison.md";
    if (fs::exists(md)) {
      fs::copy_file(md, out / "comparison.md", fs::copy_options::overwrite_existing);
      artifacts["comparison_table"] = "comparison.md";
    }
    artifacts["ablation_auc"] = "ablation_auc.svg";
    artifacts["comparison"] = "comparison.json";
  }
  json sources = json::array();
  for (const auto& r : a.runs) sources.push_back(fs::absolute(r).string());
  ms.set_config({{"runs", sources}});
  ms.get().artifacts = artifacts;
  ms.finish(out);
  return 0;
}

std::vector<std::string> to_strings(int argc, const char* const* argv) {
  std::vector<std::string> out;
  for (int i = 0; i < argc; ++i) out.emplace_back(argv[i]);
  return out;
}

}  // namespace

int run(int argc, const char* const* argv) {
  const auto args = to_strings(argc, argv);
  CLI::App app{"dfx: synthetic deepfake detection with explainable reasoning", "dfx"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Render a labelled synthetic face corpus");
  c_synth->add_option("--seed", synth.seed, "Root seed");
  c_synth->add_option("--n", synth.n, "Number of images")->check(CLI::PositiveNumber);
  c_synth->add_option("--side", synth.side, "Image side in pixels")->check(CLI::PositiveNumber);
  c_synth->add_option("--out", synth.out, "Output directory")->required();

  DatagenArgs dg;
  auto* c_dg = app.add_subcommand("datagen", "Caption a corpus and build instruction samples");
  c_dg->add_option("--corpus", dg.corpus, "Corpus directory")->required();
  c_dg->add_option("--out", dg.out, "Output directory")->required();
  c_dg->add_flag("--stub", dg.stub, "Use the offline template client");
  c_dg->add_option("--endpoint", dg.endpoint, "Chat-completion URL");
  c_dg->add_option("--model", dg.model, "Model name sent to the endpoint");
  c_dg->add_option("--api-key-env", dg.api_key_env, "Environment variable holding the API key");
  c_dg->add_option("--timeout", dg.timeout, "Request timeout in seconds");
  c_dg->add_option("--concurrency", dg.concurrency, "Concurrent requests")->check(CLI::PositiveNumber);
  c_dg->add_option("--retries", dg.retries, "Retries per image")->check(CLI::NonNegativeNumber);
  c_dg->add_option("--backoff-ms", dg.backoff_ms, "Initial retry backoff")->check(CLI::NonNegativeNumber);

  EncoderArgs enc;
  auto* c_enc = app.add_subcommand(
      "train-encoder", "Stage 1: train the detector (accepts --train.*, --loss.*, --vision.*, --text.* overrides)");
  c_enc->add_option("--corpus", enc.corpus, "Corpus directory")->required();
  c_enc->add_option("--captions", enc.captions, "captions.jsonl (needed for contrastive presets)");
  c_enc->add_option("--out", enc.out, "Output directory")->required();
  c_enc->add_option("--config", enc.config, "JSON config or a run manifest");
  c_enc->add_option("--ablation", enc.ablation, "Preset or sweep")
      ->check(CLI::IsMember({"none", "contrastive", "uncertainty", "full", "sweep"}));
  c_enc->add_option("--seeds", enc.seeds, "Seeds to run")->delimiter(',');
  c_enc->add_option("--seed", enc.seed, "Root seed");
  c_enc->add_option("--set", enc.sets, "Override, e.g. train.epochs=2");

  ReasonerArgs rs;
  auto* c_rs = app.add_subcommand(
      "train-reasoner", "Stage 2: instruction-tune the reasoner (accepts --stage2.*, --projector.*, --lm.* overrides)");
  c_rs->add_option("--encoder", rs.encoder, "Stage-1 checkpoint")->required();
  c_rs->add_option("--corpus", rs.corpus, "Corpus directory")->required();
  c_rs->add_option("--instructions", rs.instructions, "instructions.jsonl")->required();
  c_rs->add_option("--out", rs.out, "Output directory")->required();
  c_rs->add_option("--config", rs.config, "JSON config or a run manifest");
  c_rs->add_option("--seed", rs.seed, "Root seed");
  c_rs->add_option("--set", rs.sets, "Override, e.g. stage2.epochs_joint=2");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Detection and caption metrics as a JSON report");
  c_ev->add_option("--pred", ev.pred, "Predictions JSONL");
  c_ev->add_option("--encoder", ev.encoder, "Stage-1 checkpoint");
  c_ev->add_option("--reasoner", ev.reasoner, "Stage-2 checkpoint");
  c_ev->add_option("--corpus", ev.corpus, "Corpus directory");
  c_ev->add_option("--instructions", ev.instructions, "instructions.jsonl (references)");
  c_ev->add_option("--split", ev.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  c_ev->add_option("--threshold", ev.threshold, "Decision threshold on the fake probability");
  c_ev->add_option("--max-new", ev.max_new, "Generation length cap");
  c_ev->add_option("--write-pred", ev.write_pred, "Also write the predictions JSONL");
  c_ev->add_option("--out", ev.out, "Directory for report.json and a manifest");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Answer a question about images");
  c_gen->add_option("--reasoner", gen.reasoner, "Stage-2 checkpoint")->required();
  c_gen->add_option("--corpus", gen.corpus, "Corpus directory")->required();
  c_gen->add_option("--encoder", gen.encoder, "Override the encoder path in the checkpoint");
  c_gen->add_option("--image-id", gen.image_ids, "Image ids");
  c_gen->add_option("--split", gen.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  c_gen->add_option("--question", gen.question, "Question text");
  c_gen->add_option("--max-new", gen.max_new, "Generation length cap");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Render curves and comparison charts as SVG");
  c_rep->add_option("--run", rep.runs, "Run or sweep directories")->required();
  c_rep->add_option("--comparison", rep.comparison, "comparison.json");
  c_rep->add_option("--out", rep.out, "Output directory")->required();

  try {
    const auto* sections_for = [&]() -> const std::vector<std::string>* {
      if (args.size() > 1 && args[1] == "train-encoder") return &kEncoderSections;
      if (args.size() > 1 && args[1] == "train-reasoner") return &kReasonerSections;
      return nullptr;
    }();
    SplitArgs split;
    if (sections_for) {
      const std::vector<std::string> tail(args.begin() + 1, args.end());
      split = split_overrides(tail, *sections_for);
    } else {
      split.rest.assign(args.begin() + 1, args.end());
    }
    std::vector<std::string> reversed(split.rest.rbegin(), split.rest.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }
    if (c_synth->parsed()) return cmd_synth(synth, args);
    if (c_dg->parsed()) return cmd_datagen(dg, args);
    if (c_enc->parsed()) return cmd_train_encoder(enc, split.overrides, args);
    if (c_rs->parsed()) return cmd_train_reasoner(rs, split.overrides, args);
    if (c_ev->parsed()) return cmd_eval(ev, args);
    if (c_gen->parsed()) return cmd_generate(gen);
    if (c_rep->parsed()) return cmd_report(rep, args);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dfx::cli
