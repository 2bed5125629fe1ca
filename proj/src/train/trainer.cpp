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

#include "dfx/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"
#include "dfx/metrics/metrics.hpp"
#include "dfx/nn/checkpoint.hpp"

namespace dfx::train {

using encoder::Detector;
using encoder::ForwardOptions;
using synthface::LabeledImage;
using synthface::Split;

CaptionIndex index_captions(const std::vector<datagen::CaptionRecord>& records) {
  CaptionIndex idx;
  for (const auto& r : records) {
    auto& list = idx[r.image_id];
    for (const auto& s : r.sentences) list.push_back(s.text);
  }
  return idx;
}

namespace {

ForwardOptions eval_options(const AblationFlags& flags) {
  ForwardOptions opt;
  opt.need_z = flags.use_adapter;
  opt.sample = false;
  opt.use_adapter = flags.use_adapter;
  return opt;
}

std::vector<const float*> pixel_ptrs(const std::vector<const LabeledImage*>& images,
                                     std::size_t begin, std::size_t end) {
  std::vector<const float*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(images[i]->pixels.data());
  return out;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)), detector_(cfg_.vision), text_(cfg_.text),
      noise_(make_rng(cfg_.seed, "noise")) {
  cfg_.validate();
  detector_.init(cfg_.seed);
  detector_.temperature().value[0] = static_cast<float>(cfg_.loss.temperature_init);
  adam_ = std::make_unique<nn::Adam<float>>(detector_.parameters());
}

StepReport Trainer::train_step(const std::vector<TrainItem>& batch, double lr) {
  const AblationFlags& ab = cfg_.ablation;
  const int b = static_cast<int>(batch.size());
  if (b < 1) throw ContractError("train_step: empty batch");
  if (ab.use_contrastive && b < 2)
    throw ContractError("train_step: contrastive learning needs at least 2 images");

  std::vector<const float*> images;
  std::vector<double> labels;
  for (const auto& item : batch) {
    if (!item.image) throw ContractError("train_step: null image");
    if (item.image->side != cfg_.vision.image_side)
      throw ShapeError("train_step: image side does not match the vision config");
    images.push_back(item.image->pixels.data());
    labels.push_back(item.image->label == synthface::Label::kFake ? 1.0 : 0.0);
  }

  ForwardOptions opt;
  opt.use_adapter = ab.use_adapter;
  opt.need_z = ab.use_contrastive || ab.use_adapter;
  opt.sample = ab.use_uncertainty && opt.need_z;
  Tensor<float> eps;
  if (opt.sample) {
    eps.resize(b, cfg_.vision.dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& e : eps.storage()) e = static_cast<float>(normal(noise_));
  }

  Detector<float>::Cache cache;
  const auto out = detector_.forward(images, opt, opt.sample ? &eps : nullptr, &cache);

  std::vector<double> logits(out.logits.begin(), out.logits.end());
  const auto bce = objectives::bce_loss(logits, labels);
  StepLosses losses;
  losses.cls = bce.loss;

  objectives::ContrastiveResult cst;
  if (ab.use_contrastive) {
    Tensor<double> t(b, cfg_.text.dim);
    for (int i = 0; i < b; ++i) {
      const auto emb = text_.encode(batch[static_cast<std::size_t>(i)].sentence);
      ++text_calls_;
      std::copy(emb.begin(), emb.end(), t.row(i));
    }
    cst = objectives::contrastive_loss(out.z.cast<double>(), t, detector_.temperature_value());
    losses.cst = cst.loss;
  }

  objectives::KlResult kl;
  const bool use_kl = cfg_.loss.kl_weight > 0 && opt.sample;
  if (use_kl) {
    kl = objectives::kl_regularizer(out.mu.cast<double>(), out.sigma.cast<double>());
    losses.kl = kl.loss;
  }
  losses.total = objectives::total_loss(losses.cls, losses.cst, losses.kl, cfg_.loss);
  if (!std::isfinite(losses.total) || !std::isfinite(losses.cls) || !std::isfinite(losses.cst) ||
      !std::isfinite(losses.kl)) {
    std::ostringstream os;
    os << "non-finite loss at step " << step_ << ": total=" << losses.total
       << " cls=" << losses.cls << " cst=" << losses.cst << " kl=" << losses.kl
       << " temperature=" << detector_.temperature_value();
    throw NumericError(os.str());
  }

  auto params = detector_.parameters();
  nn::zero_grads(params);
  encoder::DetectorGrads<float> g;
  g.dlogit.resize(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i)
    g.dlogit[static_cast<std::size_t>(i)] =
        static_cast<float>(cfg_.loss.beta * bce.dlogits[static_cast<std::size_t>(i)]);
  if (ab.use_contrastive) {
    g.dz = Tensor<float>(b, cfg_.vision.dim);
    for (std::size_t i = 0; i < g.dz.size(); ++i)
      g.dz[i] = static_cast<float>(cfg_.loss.alpha * cst.dz[i]);
  }
  if (use_kl) {
    g.dmu = Tensor<float>(b, cfg_.vision.dim);
    g.dsigma = Tensor<float>(b, cfg_.vision.dim);
    for (std::size_t i = 0; i < g.dmu.size(); ++i) {
      g.dmu[i] = static_cast<float>(cfg_.loss.kl_weight * kl.dmu[i]);
      g.dsigma[i] = static_cast<float>(cfg_.loss.kl_weight * kl.dsigma[i]);
    }
  }
  detector_.backward(cache, out, g);
  if (ab.use_contrastive)
    detector_.temperature().grad[0] = static_cast<float>(cfg_.loss.alpha * cst.dw);

  StepReport rep;
  rep.step = step_;
  rep.lr = lr;
  rep.losses = losses;
  rep.grad_norm = nn::grad_norm(params);
  if (!std::isfinite(rep.grad_norm))
    throw NumericError("non-finite gradient norm at step " + std::to_string(step_) +
                       " (total loss " + std::to_string(losses.total) + ")");
  if (cfg_.clip_norm > 0) nn::clip_grad_norm(params, cfg_.clip_norm);
  adam_->step(lr);
  auto& w = detector_.temperature().value[0];
  w = static_cast<float>(objectives::clamp_temperature(w, cfg_.loss));

  for (int i = 0; i < b; ++i) {
    rep.gate_w1_mean += out.w(i, 0);
    rep.gate_w2_mean += out.w(i, 1);
  }
  rep.gate_w1_mean /= b;
  rep.gate_w2_mean /= b;
  rep.temperature = detector_.temperature_value();
  ++step_;
  return rep;
}

std::vector<double> Trainer::scores(const std::vector<const LabeledImage*>& images) const {
  return detector_scores(detector_, cfg_.ablation, images, cfg_.eval_batch);
}

std::vector<double> detector_scores(const Detector<float>& det, const AblationFlags& flags,
                                    const std::vector<const LabeledImage*>& images,
                                    int batch_size) {
  std::vector<double> out;
  out.reserve(images.size());
  const auto opt = eval_options(flags);
  for (std::size_t begin = 0; begin < images.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(images.size(), begin + static_cast<std::size_t>(batch_size));
    const auto ptrs = pixel_ptrs(images, begin, end);
    const auto o = det.forward(ptrs, opt, nullptr, nullptr);
    out.insert(out.end(), o.logits.begin(), o.logits.end());
  }
  return out;
}

double split_auc(const Detector<float>& det, const AblationFlags& flags,
                 const std::vector<const LabeledImage*>& images, int batch_size) {
  const auto s = detector_scores(det, flags, images, batch_size);
  std::vector<int> y;
  for (const auto* img : images) y.push_back(img->label == synthface::Label::kFake ? 1 : 0);
  return metrics::auc(s, y);
}

namespace {

nlohmann::json checkpoint_manifest(const TrainConfig& cfg, Detector<float>& det,
                                   const encoder::TextEncoder& text, int epoch, int step,
                                   double val_auc, const std::string& role) {
  const auto config = to_json(cfg);
  return {{"kind", "dfx-detector/1"},
          {"role", role},
          {"preset", preset_name(cfg.ablation)},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"epoch", epoch},
          {"step", step},
          {"val_auc", val_auc},
          {"param_checksum", hex64(nn::checksum(det.parameters()))},
          {"text_checksum", hex64(text.checksum())}};
}

nlohmann::json step_line(const StepReport& r, int epoch) {
  return {{"kind", "step"},
          {"epoch", epoch},
          {"step", r.step},
          {"lr", r.lr},
          {"loss_total", r.losses.total},
          {"loss_cls", r.losses.cls},
          {"loss_cst", r.losses.cst},
          {"loss_kl", r.losses.kl},
          {"gate_w1_mean", r.gate_w1_mean},
          {"grad_norm", r.grad_norm},
          {"temperature", r.temperature}};
}

}  // namespace

Stage1Result train_stage1(const synthface::SynthCorpus& corpus,
                          const std::vector<datagen::CaptionRecord>* captions,
                          const TrainConfig& cfg, const std::filesystem::path& out_dir,
                          const Stage1Options& options) {
  cfg.validate();
  const auto train = corpus.in_split(Split::kTrain);
  const auto val = corpus.in_split(Split::kVal);
  const auto test = corpus.in_split(Split::kTest);
  if (train.empty() || val.empty()) throw ConfigError("corpus needs train and val images");

  CaptionIndex idx;
  if (cfg.ablation.use_contrastive) {
    if (!captions || captions->empty())
      throw ConfigError("contrastive learning needs captions (run datagen first)");
    idx = index_captions(*captions);
    for (const auto* img : train) {
      const auto it = idx.find(img->id);
      if (it == idx.end() || it->second.empty())
        throw ConfigError("no caption sentences for train image " + img->id);
    }
  }

  const int n = static_cast<int>(train.size());
  const int min_batch = cfg.ablation.use_contrastive ? 2 : 1;
  const int full = n / cfg.batch_size;
  const int rest = n % cfg.batch_size;
  const int per_epoch = full + (rest >= min_batch ? 1 : 0);
  if (per_epoch == 0) throw ConfigError("train split smaller than one batch");
  const int total = per_epoch * cfg.epochs;
  if (total <= cfg.warmup_steps)
    throw ConfigError("run has " + std::to_string(total) +
                      " steps, not more than train.warmup_steps " +
                      std::to_string(cfg.warmup_steps));

  std::filesystem::create_directories(out_dir);
  Stage1Result res;
  res.best_checkpoint = out_dir / "best.ckpt";
  res.final_checkpoint = out_dir / "final.ckpt";
  res.metrics_log = out_dir / "metrics.jsonl";
  std::ofstream log(res.metrics_log, std::ios::trunc);
  if (!log) throw IoError("cannot write " + res.metrics_log.string());

  Trainer tr(cfg);
  res.text_checksum_before = tr.text_encoder().checksum();
  Rng shuffle = make_rng(cfg.seed, "shuffle");
  Rng caption_rng = make_rng(cfg.seed, "caption");
  std::vector<int> order(static_cast<std::size_t>(n));
  int step = 0;
  res.best_val_auc = -1;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle);
    double loss_sum = 0;
    for (int bi = 0; bi < per_epoch; ++bi) {
      const int begin = bi * cfg.batch_size;
      const int end = std::min(n, begin + cfg.batch_size);
      std::vector<TrainItem> batch;
      for (int k = begin; k < end; ++k) {
        TrainItem item{train[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])], {}};
        if (cfg.ablation.use_contrastive) {
          const auto& sentences = idx.at(item.image->id);
          std::uniform_int_distribution<std::size_t> pick(0, sentences.size() - 1);
          item.sentence = sentences[pick(caption_rng)];
        }
        batch.push_back(std::move(item));
      }
      const auto rep = tr.train_step(batch, lr_at(step + 1, total, cfg));
      ++step;
      loss_sum += rep.losses.total;
      log << step_line(rep, epoch).dump() << "\n";
      res.steps.push_back(rep);
      if (options.on_step) options.on_step(rep);
    }
    EpochRecord er{epoch, loss_sum / per_epoch, split_auc(tr.detector(), cfg.ablation, val, cfg.eval_batch)};
    res.epochs.push_back(er);
    log << nlohmann::json{{"kind", "epoch"},
                          {"epoch", epoch},
                          {"step", step},
                          {"train_loss", er.train_loss},
                          {"val_auc", er.val_auc}}
               .dump()
        << "\n";
    log.flush();
    if (er.val_auc > res.best_val_auc) {
      res.best_val_auc = er.val_auc;
      res.best_epoch = epoch;
      nn::save_checkpoint(res.best_checkpoint,
                          checkpoint_manifest(cfg, tr.detector(), tr.text_encoder(), epoch, step,
                                              er.val_auc, "best"),
                          tr.detector().parameters());
    }
    if (options.on_epoch) options.on_epoch(er);
  }

  nn::save_checkpoint(res.final_checkpoint,
                      checkpoint_manifest(cfg, tr.detector(), tr.text_encoder(), cfg.epochs, step,
                                          res.epochs.back().val_auc, "final"),
                      tr.detector().parameters());
  res.final_checksum = nn::checksum(tr.detector().parameters());
  res.text_checksum_after = tr.text_encoder().checksum();
  if (res.text_checksum_after != res.text_checksum_before)
    throw Error("text encoder parameters changed during stage 1");
  if (!test.empty()) {
    res.test_auc_final = split_auc(tr.detector(), cfg.ablation, test, cfg.eval_batch);
    const auto best = load_detector(res.best_checkpoint);
    res.test_auc_best = split_auc(best.detector, cfg.ablation, test, cfg.eval_batch);
  }
  return res;
}

LoadedDetector load_detector(const std::filesystem::path& checkpoint) {
  auto manifest = nn::read_checkpoint_manifest(checkpoint);
  if (manifest.value("kind", std::string()) != "dfx-detector/1")
    throw ConfigError(checkpoint.string() + " is not a detector checkpoint");
  LoadedDetector out{train_config_from_json(manifest.at("config")), Detector<float>(), manifest};
  out.detector = Detector<float>(out.config.vision);
  nn::load_checkpoint(checkpoint, out.detector.parameters());
  return out;
}

RunSummary summarize(const Stage1Result& result, const TrainConfig& cfg,
                     const std::filesystem::path& dir) {
  return {preset_name(cfg.ablation), cfg.seed,          cfg.ablation,
          result.best_val_auc,       result.test_auc_best, result.test_auc_final,
          hex64(result.final_checksum), dir.string()};
}

nlohmann::json to_json(const RunSummary& s) {
  return {{"preset", s.preset},
          {"seed", s.seed},
          {"use_contrastive", s.flags.use_contrastive},
          {"use_uncertainty", s.flags.use_uncertainty},
          {"use_adapter", s.flags.use_adapter},
          {"best_val_auc", s.best_val_auc},
          {"test_auc", s.test_auc},
          {"test_auc_final", s.test_auc_final},
          {"checksum", s.checksum},
          {"dir", s.dir}};
}

RunSummary run_summary_from_json(const nlohmann::json& j) {
  RunSummary s;
  try {
    s.preset = j.at("preset").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.flags = {j.at("use_contrastive").get<bool>(), j.at("use_uncertainty").get<bool>(),
               j.at("use_adapter").get<bool>()};
    s.best_val_auc = j.at("best_val_auc").get<double>();
    s.test_auc = j.at("test_auc").get<double>();
    s.test_auc_final = j.value("test_auc_final", s.test_auc);
    s.checksum = j.value("checksum", std::string());
    s.dir = j.value("dir", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run summary: ") + e.what());
  }
  return s;
}

nlohmann::json comparison_table(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw ContractError("comparison_table: no runs");
  std::vector<std::string> order = preset_names();
  for (const auto& r : runs)
    if (std::find(order.begin(), order.end(), r.preset) == order.end()) order.push_back(r.preset);
  nlohmann::json rows = nlohmann::json::array();
  std::string best;
  double best_mean = -1;
  for (const auto& name : order) {
    std::vector<const RunSummary*> group;
    for (const auto& r : runs)
      if (r.preset == name) group.push_back(&r);
    if (group.empty()) continue;
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->seed < b->seed; });
    double mean = 0;
    nlohmann::json list = nlohmann::json::array();
    for (const auto* r : group) {
      mean += r->test_auc;
      list.push_back(to_json(*r));
    }
    mean /= static_cast<double>(group.size());
    double var = 0;
    for (const auto* r : group) var += (r->test_auc - mean) * (r->test_auc - mean);
    const double sd =
        group.size() > 1 ? std::sqrt(var / static_cast<double>(group.size() - 1)) : 0.0;
    if (mean > best_mean) {
      best_mean = mean;
      best = name;
    }
    const auto& f = group.front()->flags;
    rows.push_back({{"preset", name},
                    {"semantic_artifacts", f.use_contrastive},
                    {"uncertainty", f.use_uncertainty},
                    {"adapter", f.use_adapter},
                    {"seeds", group.size()},
                    {"test_auc_mean", mean},
                    {"test_auc_std", sd},
                    {"runs", list}});
  }
  return {{"metric", "held-out AUC of the best-validation checkpoint"},
          {"rows", rows},
          {"best_preset", best}};
}

void write_comparison(const std::filesystem::path& dir, const nlohmann::json& table) {
  std::filesystem::create_directories(dir);
  std::ofstream js(dir / "comparison.json", std::ios::trunc);
  std::ofstream md(dir / "comparison.md", std::ios::trunc);
  if (!js || !md) throw IoError("cannot write comparison files in " + dir.string());
  js << table.dump(2) << "\n";
  md << "| Configuration | Semantic artifacts | Uncertainty | Adapter | Seeds | AUC mean | AUC std |\n"
     << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : table.at("rows")) {
    auto mark = [](const nlohmann::json& b) { return b.get<bool>() ? "x" : " "; };
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d | %.4f | %.4f", r.at("seeds").get<int>(),
                  r.at("test_auc_mean").get<double>(), r.at("test_auc_std").get<double>());
    md << "| " << r.at("preset").get<std::string>() << " | " << mark(r.at("semantic_artifacts"))
       << " | " << mark(r.at("uncertainty")) << " | " << mark(r.at("adapter")) << " | " << buf
       << " |\n";
  }
}

nlohmann::json run_ablation(const synthface::SynthCorpus& corpus,
                            const std::vector<datagen::CaptionRecord>& captions,
                            const TrainConfig& base, const std::vector<std::string>& presets,
                            const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir, const Stage1Options& options) {
  if (presets.empty() || seeds.empty()) throw ConfigError("ablation needs presets and seeds");
  std::vector<RunSummary> runs;
  for (const auto& name : presets) {
    for (const auto seed : seeds) {
      TrainConfig cfg = base;
      cfg.ablation = preset(name);
      cfg.seed = seed;
      const auto dir = out_dir / (name + "-seed" + std::to_string(seed));
      runs.push_back(summarize(train_stage1(corpus, &captions, cfg, dir, options), cfg, dir));
    }
  }
  auto table = comparison_table(runs);
  table["config"] = to_json(base);
  write_comparison(out_dir, table);
  return table;
}

}  // namespace dfx::train
