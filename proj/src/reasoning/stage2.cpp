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

#include "dfx/reasoning/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"
#include "dfx/kernels/kernels.hpp"
#include "dfx/nn/adam.hpp"
#include "dfx/nn/checkpoint.hpp"

namespace dfx::reasoning {

using datagen::InstructionSample;

void Stage2Config::validate() const {
  projector.validate();
  lm.validate();
  if (projector.d_l != lm.d_l) throw ConfigError("projector.d_l must equal lm.d_l");
  if (batch_size < 1) throw ConfigError("stage2.batch_size must be positive");
  if (epochs_projector < 0 || epochs_joint < 0 || epochs_projector + epochs_joint < 1)
    throw ConfigError("stage2 needs at least one epoch");
  if (!(lr_projector > 0) || !(lr_joint > 0)) throw ConfigError("stage2 learning rates must be positive");
  if (warmup_steps < 0 || clip_norm < 0 || lora_rank < 0 || eval_samples < 1 || max_new_tokens < 1)
    throw ConfigError("invalid stage2 settings");
}

nlohmann::json to_json(const Stage2Config& c) {
  return {{"stage2",
           {{"batch_size", c.batch_size},
            {"epochs_projector", c.epochs_projector},
            {"epochs_joint", c.epochs_joint},
            {"lr_projector", c.lr_projector},
            {"lr_joint", c.lr_joint},
            {"warmup_steps", c.warmup_steps},
            {"clip_norm", c.clip_norm},
            {"lora_rank", c.lora_rank},
            {"lora_alpha", c.lora_alpha},
            {"eval_samples", c.eval_samples},
            {"max_new_tokens", c.max_new_tokens},
            {"seed", c.seed}}},
          {"projector", c.projector},
          {"lm", c.lm}};
}

Stage2Config stage2_config_from_json(const nlohmann::json& j) {
  Stage2Config c;
  try {
    for (const auto& [key, _] : j.items())
      if (key != "stage2" && key != "projector" && key != "lm")
        throw ConfigError("unknown config section '" + key + "'");
    const auto s = j.value("stage2", nlohmann::json::object());
    c.batch_size = s.value("batch_size", c.batch_size);
    c.epochs_projector = s.value("epochs_projector", c.epochs_projector);
    c.epochs_joint = s.value("epochs_joint", c.epochs_joint);
    c.lr_projector = s.value("lr_projector", c.lr_projector);
    c.lr_joint = s.value("lr_joint", c.lr_joint);
    c.warmup_steps = s.value("warmup_steps", c.warmup_steps);
    c.clip_norm = s.value("clip_norm", c.clip_norm);
    c.lora_rank = s.value("lora_rank", c.lora_rank);
    c.lora_alpha = s.value("lora_alpha", c.lora_alpha);
    c.eval_samples = s.value("eval_samples", c.eval_samples);
    c.max_new_tokens = s.value("max_new_tokens", c.max_new_tokens);
    c.seed = s.value("seed", c.seed);
    if (j.contains("projector")) c.projector = j["projector"].get<ProjectorConfig>();
    if (j.contains("lm")) c.lm = j["lm"].get<ToyLMConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed stage2 config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<VisualFeatures> extract_features(const encoder::Detector<float>& detector,
                                             const train::AblationFlags& flags,
                                             const std::vector<const synthface::LabeledImage*>& images,
                                             int batch_size) {
  if (batch_size < 1) throw ConfigError("feature batch size must be positive");
  const int np = detector.config().num_patches();
  const int d = detector.config().dim;
  std::vector<VisualFeatures> out;
  out.reserve(images.size());
  encoder::ForwardOptions opt;
  opt.need_z = flags.use_adapter;
  opt.use_adapter = flags.use_adapter;
  opt.keep_penultimate = true;
  for (std::size_t begin = 0; begin < images.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(images.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<const float*> ptrs;
    for (std::size_t i = begin; i < end; ++i) ptrs.push_back(images[i]->pixels.data());
    encoder::Detector<float>::Cache cache;
    const auto o = detector.forward(ptrs, opt, nullptr, &cache);
    const auto& pen = cache.raw.penultimate;
    for (int b = 0; b < static_cast<int>(ptrs.size()); ++b) {
      VisualFeatures f;
      f.rows = Tensor<float>(np + 1, d);
      std::copy_n(o.e.row(b), d, f.rows.row(0));
      std::copy_n(pen.row(b * np), static_cast<std::size_t>(np) * d, f.rows.row(1));
      f.score = o.logits[static_cast<std::size_t>(b)];
      out.push_back(std::move(f));
    }
  }
  return out;
}

// ---- reasoner ----------------------------------------------------------------

namespace {

ToyLMConfig sized_lm(ToyLMConfig lm, const Vocabulary& vocab) {
  if (vocab.size() > lm.vocab_size)
    throw ConfigError("vocabulary of " + std::to_string(vocab.size()) +
                      " tokens exceeds lm.vocab_size " + std::to_string(lm.vocab_size));
  lm.vocab_size = vocab.size();
  return lm;
}

}  // namespace

Reasoner::Reasoner(Stage2Config cfg, Vocabulary vocab)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), projector_(cfg_.projector),
      lm_(sized_lm(cfg_.lm, vocab_)) {
  cfg_.validate();
}

void Reasoner::init(std::uint64_t seed) {
  Rng rng = make_rng(seed, "stage2-init");
  projector_.init(rng, cfg_.lm.init_std);
  lm_.init(rng);
}

nn::ParamList<float> Reasoner::parameters() {
  auto out = projector_.parameters();
  for (auto* p : lm_.parameters()) out.push_back(p);
  return out;
}

AssembledSequence<float> Reasoner::assemble(const VisualFeatures& features,
                                            std::string_view question,
                                            std::string_view response) const {
  const auto visual = projector_.forward(features.rows, nullptr);
  const auto q = vocab_.encode(question);
  const auto r = vocab_.encode(response);
  return assemble_sequence<float>(visual, q, r, cfg_.lm.max_seq);
}

Generation Reasoner::generate(const VisualFeatures& features, std::string_view question,
                              int max_new) const {
  if (max_new < 1) throw ConfigError("max_new must be positive");
  const auto visual = projector_.forward(features.rows, nullptr);
  const auto q = vocab_.encode(question);
  const int prefix = 1 + visual.rows() + static_cast<int>(q.size());
  if (prefix + 1 > cfg_.lm.max_seq) throw ContractError("prompt exceeds lm.max_seq");
  const int d = cfg_.lm.d_l;
  Tensor<float> x(prefix, d);
  const int bos = Vocabulary::kBos;
  std::copy_n(lm_.embed(std::span<const int>(&bos, 1)).data(), d, x.row(0));
  std::copy_n(visual.data(), visual.size(), x.row(1));
  const auto qe = lm_.embed(q);
  std::copy_n(qe.data(), qe.size(), x.row(1 + visual.rows()));

  auto state = lm_.start();
  Tensor<float> logits = lm_.step(x, state);
  int row = logits.rows() - 1;
  Generation g;
  const int budget = std::min(max_new, cfg_.lm.max_seq - prefix);
  for (int n = 0; n < budget; ++n) {
    int best = -1;
    float best_v = 0;
    for (int v = 0; v < logits.cols(); ++v) {
      if (v == Vocabulary::kPad || v == Vocabulary::kBos || v == Vocabulary::kImage) continue;
      if (best < 0 || logits(row, v) > best_v) {
        best = v;
        best_v = logits(row, v);
      }
    }
    if (best == Vocabulary::kEos) break;
    g.tokens.push_back(best);
    if (n + 1 == budget) break;
    logits = lm_.step(lm_.embed(std::span<const int>(&best, 1)), state);
    row = 0;
  }
  g.response = vocab_.decode(g.tokens);
  g.verdict = verdict(g.response);
  return g;
}

// ---- training ----------------------------------------------------------------

namespace {

struct Encoded {
  const InstructionSample* sample;
  const VisualFeatures* features;
  std::vector<int> question, response;
};

struct LoraAdapter {
  nn::Param<float>* base = nullptr;
  nn::Param<float> a, b;  // a: r x in, b: out x r
  std::vector<float> saved;
  float scale = 1;

  void merge() {
    saved = base->value.storage();
    fold(base->value);
  }
  void fold(Tensor<float>& w) const {
    const int out = w.rows(), in = w.cols(), r = a.value.rows();
    kernels::gemm(false, false, out, in, r, scale, b.value.data(), r, a.value.data(), in, 1.0f,
                  w.data(), in);
  }
  void restore() { base->value.storage() = saved; }
  void grads() {
    const int out = base->value.rows(), in = base->value.cols(), r = a.value.rows();
    kernels::gemm(true, false, r, in, out, scale, b.value.data(), r, base->grad.data(), in, 1.0f,
                  a.grad.data(), in);
    kernels::gemm(false, true, out, r, in, scale, base->grad.data(), in, a.value.data(), in, 1.0f,
                  b.grad.data(), r);
    base->grad.zero();
  }
};

std::vector<LoraAdapter> make_adapters(ToyLM<float>& lm, int rank, double alpha, Rng& rng) {
  std::vector<LoraAdapter> out;
  for (auto* p : lm.parameters()) {
    if (p->name.rfind("lm.block", 0) != 0 || p->value.rows() < 2 || p->value.cols() < 2) continue;
    LoraAdapter ad;
    ad.base = p;
    ad.a = nn::Param<float>(p->name + ".lora_a", rank, p->value.cols());
    ad.b = nn::Param<float>(p->name + ".lora_b", p->value.rows(), rank);
    ad.a.fill_normal(rng, 1.0 / std::sqrt(static_cast<double>(p->value.cols())));
    ad.scale = static_cast<float>(alpha / rank);
    out.push_back(std::move(ad));
  }
  return out;
}

// Forward (and optionally backward) over one padded batch.
double run_batch(Reasoner& r, const std::vector<const Encoded*>& batch, bool backward,
                 bool lm_param_grads, bool lm_token_grads) {
  const int b = static_cast<int>(batch.size());
  const int dv = r.config().projector.d_v;
  const int rows_per = batch.front()->features->rows.rows();
  Tensor<float> feats(b * rows_per, dv);
  for (int i = 0; i < b; ++i) {
    const auto& f = batch[static_cast<std::size_t>(i)]->features->rows;
    if (f.rows() != rows_per || f.cols() != dv) throw ShapeError("inconsistent visual features");
    std::copy_n(f.data(), f.size(), feats.row(i * rows_per));
  }
  Projector<float>::Cache pcache;
  const auto visual = r.projector().forward(feats, backward ? &pcache : nullptr);
  const int dl = visual.cols();

  std::vector<AssembledSequence<float>> seqs;
  seqs.reserve(static_cast<std::size_t>(b));
  int width = 0;
  for (int i = 0; i < b; ++i) {
    Tensor<float> vt(rows_per, dl);
    std::copy_n(visual.row(i * rows_per), vt.size(), vt.data());
    const auto* e = batch[static_cast<std::size_t>(i)];
    seqs.push_back(assemble_sequence<float>(vt, e->question, e->response, r.config().lm.max_seq));
    width = std::max(width, seqs.back().length());
  }
  std::vector<const AssembledSequence<float>*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);

  const auto x = r.lm().embed_batch(ptrs, width);
  ToyLM<float>::Cache cache;
  const auto logits = r.lm().forward(x, b, width, backward ? &cache : nullptr);
  Tensor<double> dlogits;
  const double loss = ar_loss(logits, ptrs, width, backward ? &dlogits : nullptr);
  if (!std::isfinite(loss)) throw NumericError("non-finite ar_loss " + std::to_string(loss));
  if (!backward) return loss;

  Tensor<float> dl_f = dlogits.cast<float>();
  Tensor<float> dx;
  r.lm().backward(cache, dl_f, dx, lm_param_grads);
  if (lm_token_grads) r.lm().accumulate_token_grads(ptrs, width, dx);
  Tensor<float> dvis(b * rows_per, dl);
  for (int i = 0; i < b; ++i)
    for (int v = 0; v < rows_per; ++v)
      std::copy_n(dx.row(i * width + 1 + v), dl, dvis.row(i * rows_per + v));
  r.projector().backward(pcache, dvis, nullptr);
  return loss;
}

std::vector<const synthface::LabeledImage*> images_for(
    const synthface::SynthCorpus& corpus, const std::vector<InstructionSample>& instructions,
    std::map<std::string, std::size_t>& slot) {
  std::vector<const synthface::LabeledImage*> images;
  for (const auto& s : instructions) {
    if (slot.count(s.image_id)) continue;
    const auto* img = corpus.find(s.image_id);
    if (!img) throw ConfigError("instruction refers to unknown image " + s.image_id);
    slot[s.image_id] = images.size();
    images.push_back(img);
  }
  return images;
}

}  // namespace

double mean_ar_loss(const Reasoner& reasoner, const std::vector<const InstructionSample*>& samples,
                    const std::vector<const VisualFeatures*>& features, int batch_size) {
  if (samples.empty() || samples.size() != features.size())
    throw ContractError("mean_ar_loss: samples and features must be non-empty and aligned");
  std::vector<Encoded> enc;
  for (std::size_t i = 0; i < samples.size(); ++i)
    enc.push_back({samples[i], features[i], reasoner.vocab().encode(samples[i]->question),
                   reasoner.vocab().encode(samples[i]->response)});
  double sum = 0;
  long count = 0;
  auto& r = const_cast<Reasoner&>(reasoner);  // forward-only pass
  for (std::size_t begin = 0; begin < enc.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(enc.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<const Encoded*> batch;
    long tokens = 0;
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(&enc[i]);
      tokens += static_cast<long>(enc[i].response.size()) + 1;
    }
    sum += run_batch(r, batch, false, false, false) * static_cast<double>(tokens);
    count += tokens;
  }
  return sum / static_cast<double>(count);
}

Stage2Result train_stage2(const std::vector<InstructionSample>& instructions,
                          const synthface::SynthCorpus& corpus,
                          const std::filesystem::path& encoder_checkpoint,
                          const Stage2Config& cfg_in, const std::filesystem::path& out_dir,
                          const Stage2Options& options) {
  cfg_in.validate();
  auto enc_ckpt = train::load_detector(encoder_checkpoint);
  if (enc_ckpt.config.vision.dim != cfg_in.projector.d_v)
    throw ConfigError("projector.d_v " + std::to_string(cfg_in.projector.d_v) +
                      " does not match the encoder width " +
                      std::to_string(enc_ckpt.config.vision.dim));
  auto& detector = enc_ckpt.detector;
  Stage2Result res;
  res.encoder_checksum_before = nn::checksum(detector.parameters());

  std::vector<InstructionSample> train_set;
  for (const auto& s : instructions) {
    const auto it = corpus.split.find(s.image_id);
    if (it == corpus.split.end()) throw ConfigError("instruction refers to unknown image " + s.image_id);
    if (it->second == synthface::Split::kTrain) train_set.push_back(s);
  }
  if (train_set.empty()) throw ConfigError("no instructions for train-split images");
  res.train_samples = static_cast<int>(train_set.size());

  std::map<std::string, std::size_t> slot;
  const auto images = images_for(corpus, train_set, slot);
  const auto features =
      extract_features(detector, enc_ckpt.config.ablation, images, enc_ckpt.config.eval_batch);

  Reasoner reasoner(cfg_in, Vocabulary::build(train_set, cfg_in.lm.vocab_size));
  reasoner.init(cfg_in.seed);
  const auto& cfg = reasoner.config();

  std::vector<Encoded> enc;
  for (const auto& s : train_set)
    enc.push_back({&s, &features[slot.at(s.image_id)], reasoner.vocab().encode(s.question),
                   reasoner.vocab().encode(s.response)});

  // Fixed evaluation subset.
  std::vector<std::size_t> order(enc.size());
  std::iota(order.begin(), order.end(), 0);
  Rng eval_rng = make_rng(cfg.seed, "stage2-eval");
  std::shuffle(order.begin(), order.end(), eval_rng);
  std::vector<const InstructionSample*> eval_samples;
  std::vector<const VisualFeatures*> eval_features;
  for (std::size_t i = 0; i < std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.eval_samples)); ++i) {
    eval_samples.push_back(enc[order[i]].sample);
    eval_features.push_back(enc[order[i]].features);
  }
  auto eval = [&] { return mean_ar_loss(reasoner, eval_samples, eval_features, cfg.batch_size); };

  std::filesystem::create_directories(out_dir);
  res.loss_log = out_dir / "stage2_metrics.jsonl";
  std::ofstream log(res.loss_log, std::ios::trunc);
  if (!log) throw IoError("cannot write " + res.loss_log.string());
  auto log_eval = [&](const char* phase, double loss) {
    log << nlohmann::json{{"kind", "eval"}, {"phase", phase}, {"ar_loss", loss}}.dump() << "\n";
    log.flush();
  };

  res.initial_loss = eval();
  log_eval("initial", res.initial_loss);
  res.projector_checksum_before = nn::checksum(reasoner.projector().parameters());
  res.lm_checksum_before = nn::checksum(reasoner.lm().parameters());

  Rng shuffle = make_rng(cfg.seed, "stage2-shuffle");
  Rng lora_rng = make_rng(cfg.seed, "stage2-lora");
  std::vector<LoraAdapter> adapters;
  int global = 0;

  for (int substep = 1; substep <= 2; ++substep) {
    const int epochs = substep == 1 ? cfg.epochs_projector : cfg.epochs_joint;
    const bool joint = substep == 2;
    nn::ParamList<float> trainable = reasoner.projector().parameters();
    if (joint) {
      if (cfg.lora_rank > 0) {
        adapters = make_adapters(reasoner.lm(), cfg.lora_rank, cfg.lora_alpha, lora_rng);
        for (auto& a : adapters) {
          trainable.push_back(&a.a);
          trainable.push_back(&a.b);
        }
      } else {
        for (auto* p : reasoner.lm().parameters()) trainable.push_back(p);
      }
    }
    if (epochs > 0) {
      const int per_epoch =
          (static_cast<int>(enc.size()) + cfg.batch_size - 1) / cfg.batch_size;
      const int total = per_epoch * epochs;
      const int warmup = std::min(cfg.warmup_steps, total - 1);
      const double base = joint ? cfg.lr_joint : cfg.lr_projector;
      nn::Adam<float> adam(trainable);
      auto all = reasoner.parameters();
      for (auto& a : adapters) {
        all.push_back(&a.a);
        all.push_back(&a.b);
      }
      std::vector<std::size_t> idx(enc.size());
      int step = 0;
      for (int epoch = 0; epoch < epochs; ++epoch) {
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), shuffle);
        for (int bi = 0; bi < per_epoch; ++bi) {
          std::vector<const Encoded*> batch;
          for (int k = bi * cfg.batch_size;
               k < std::min(static_cast<int>(enc.size()), (bi + 1) * cfg.batch_size); ++k)
            batch.push_back(&enc[idx[static_cast<std::size_t>(k)]]);
          nn::zero_grads(all);
          for (auto& a : adapters) a.merge();
          const bool lm_grads = joint;
          const double loss =
              run_batch(reasoner, batch, true, lm_grads, joint && cfg.lora_rank == 0);
          for (auto& a : adapters) {
            a.grads();
            a.restore();
          }
          if (cfg.clip_norm > 0) nn::clip_grad_norm(trainable, cfg.clip_norm);
          const double lr = train::warmup_cosine(step + 1, total, warmup, base);
          adam.step(lr);
          ++step;
          Stage2Step rec{substep, global++, lr, loss};
          res.steps.push_back(rec);
          log << nlohmann::json{{"kind", "step"}, {"substep", substep}, {"step", rec.step},
                                {"lr", lr}, {"ar_loss", loss}}
                     .dump()
              << "\n";
          if (options.on_step) options.on_step(rec);
        }
      }
    }
    if (substep == 1) {
      res.projector_checksum_after_substep1 = nn::checksum(reasoner.projector().parameters());
      res.lm_checksum_after_substep1 = nn::checksum(reasoner.lm().parameters());
      res.substep1_loss = eval();
      log_eval("substep1", res.substep1_loss);
    }
  }
  for (auto& a : adapters) a.fold(a.base->value);
  res.final_loss = eval();
  log_eval("final", res.final_loss);

  res.encoder_checksum_after = nn::checksum(detector.parameters());
  if (res.encoder_checksum_after != res.encoder_checksum_before)
    throw Error("vision encoder parameters changed during stage 2");

  res.checkpoint = out_dir / "reasoner.ckpt";
  save_reasoner(res.checkpoint, reasoner,
                {{"encoder_checkpoint", std::filesystem::absolute(encoder_checkpoint).string()},
                 {"encoder_checksum", hex64(res.encoder_checksum_before)},
                 {"initial_loss", res.initial_loss},
                 {"final_loss", res.final_loss},
                 {"train_samples", res.train_samples}});
  return res;
}

void save_reasoner(const std::filesystem::path& path, Reasoner& reasoner,
                   const nlohmann::json& extra) {
  nlohmann::json m = extra;
  m["kind"] = "dfx-reasoner/1";
  m["config"] = to_json(reasoner.config());
  m["vocab"] = reasoner.vocab().to_json();
  nn::save_checkpoint(path, m, reasoner.parameters());
}

LoadedReasoner load_reasoner(const std::filesystem::path& path) {
  auto m = nn::read_checkpoint_manifest(path);
  if (m.value("kind", std::string()) != "dfx-reasoner/1")
    throw ConfigError(path.string() + " is not a reasoner checkpoint");
  LoadedReasoner out{Reasoner(stage2_config_from_json(m.at("config")),
                              Vocabulary::from_json(m.at("vocab"))),
                     m};
  nn::load_checkpoint(path, out.reasoner.parameters());
  return out;
}

}  // namespace dfx::reasoning
