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
#include <random>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"

#include "dfx/core/error.hpp"
#include "dfx/encoder/detector.hpp"
#include "dfx/encoder/text_encoder.hpp"
#include "dfx/synthface/synthface.hpp"

using dfx::Tensor;
using namespace dfx::encoder;

namespace {

VisionConfig tiny_config() {
  VisionConfig c;
  c.image_side = 16;
  c.patch_size = 8;
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.mlp_ratio = 2.0;
  c.head_layers = 2;
  c.init_std = 0.3;
  return c;
}

std::vector<std::vector<float>> random_images(int n, int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<std::vector<float>> out(static_cast<std::size_t>(n),
                                      std::vector<float>(static_cast<std::size_t>(side * side * 3)));
  for (auto& img : out)
    for (auto& v : img) v = u(rng);
  return out;
}

std::vector<const float*> ptrs(const std::vector<std::vector<float>>& imgs) {
  std::vector<const float*> p;
  for (const auto& i : imgs) p.push_back(i.data());
  return p;
}

}  // namespace

TEST_CASE("backbone produces one class token plus one token per patch") {
  Detector<float> det;
  det.init(1);
  const auto img = dfx::synthface::make_sample(1, 0, dfx::synthface::Label::kReal,
                                               dfx::synthface::ArtifactKind::kNone);
  const float* p = img.pixels.data();
  const auto raw = det.encode({&p, 1}, true, nullptr);
  CHECK(raw.tokens == 65);
  CHECK(raw.h.rows() == 65);
  CHECK(raw.h.cols() == 128);
  CHECK(raw.penultimate.rows() == 64);
  const auto again = det.encode({&p, 1}, true, nullptr);
  CHECK(raw.h == again.h);
  const auto v = det.statistical_branch(raw);
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 128);
}

TEST_CASE("changing one patch changes the class token") {
  Detector<double> det(tiny_config());
  det.init(2);
  std::mt19937_64 rng(3);
  auto imgs = random_images(1, 16, rng);
  const auto a = det.encode(ptrs(imgs), false, nullptr);
  imgs[0][0] += 0.5f;  // top-left patch only
  const auto b = det.encode(ptrs(imgs), false, nullptr);
  double diff = 0;
  for (int j = 0; j < 8; ++j) diff += std::abs(a.h(0, j) - b.h(0, j));
  CHECK(diff > 0);
}

TEST_CASE("sigma is softplus with a floor") {
  CHECK(sigma_from_raw(0.0) == doctest::Approx(std::log(2.0) + 1e-6).epsilon(1e-15));
  CHECK(sigma_from_raw(-1000.0) >= 1e-6);
  CHECK(sigma_from_raw(50.0) == doctest::Approx(50.0));
  Detector<double> det(tiny_config());
  det.init(4);
  std::mt19937_64 rng(5);
  const auto imgs = random_images(3, 16, rng);
  const auto d = det.prob_head(det.encode(ptrs(imgs), false, nullptr));
  for (double s : d.sigma.storage()) CHECK(s >= 1e-6);
}

TEST_CASE("mu does not depend on the sigma head") {
  Detector<double> det(tiny_config());
  det.init(6);
  std::mt19937_64 rng(7);
  const auto imgs = random_images(2, 16, rng);
  const auto raw = det.encode(ptrs(imgs), false, nullptr);
  const auto before = det.prob_head(raw);
  dfx::nn::ParamList<double> sp = det.sigma_parameters();
  for (auto* p : sp)
    for (auto& v : p->value.storage()) v += 0.37;
  const auto after = det.prob_head(raw);
  CHECK(before.mu == after.mu);
  CHECK(!(before.sigma == after.sigma));
}

TEST_CASE("identity-initialized statistical branch returns the class token") {
  Detector<double> det(tiny_config());
  det.init(8);
  det.statistical_head().set_identity();
  std::mt19937_64 rng(9);
  const auto imgs = random_images(2, 16, rng);
  const auto raw = det.encode(ptrs(imgs), false, nullptr);
  const auto v = det.statistical_branch(raw);
  for (int b = 0; b < 2; ++b)
    for (int j = 0; j < 8; ++j) CHECK(v(b, j) == raw.h(b * raw.tokens, j));
}

TEST_CASE("gate closed forms and simplex property") {
  Detector<double> det(tiny_config());
  det.init(10);
  auto& g = det.gate_layer();
  g.weight.value.zero();
  Tensor<double> v(1, 8, 3.0);
  auto w = det.gate(v);
  CHECK(w(0, 0) == doctest::Approx(0.5));
  CHECK(w(0, 1) == doctest::Approx(0.5));
  g.bias.value[0] = std::log(3.0);
  w = det.gate(v);
  CHECK(w(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(w(0, 1) == doctest::Approx(0.25).epsilon(1e-12));

  det.init(11);
  std::mt19937_64 rng(12);
  Tensor<double> many(200, 8);
  dfx::testing::fill_normal(many, rng, 5.0);
  w = det.gate(many);
  for (int b = 0; b < 200; ++b) {
    CHECK(std::abs(w(b, 0) + w(b, 1) - 1.0) <= 1e-6);
    CHECK(w(b, 0) > 0);
    CHECK(w(b, 1) > 0);
  }
}

TEST_CASE("aggregate vertices, cancellation and weight check") {
  const std::vector<double> v{1, -2, 3}, z{-1, 2, -3};
  CHECK(aggregate<double>(v, z, 1.0, 0.0) == v);
  CHECK(aggregate<double>(v, z, 0.0, 1.0) == z);
  for (double e : aggregate<double>(v, z, 0.5, 0.5)) CHECK(e == 0.0);
  CHECK_THROWS_AS(aggregate<double>(v, z, 0.6, 0.6), dfx::ContractError);
}

TEST_CASE("classifier head is linear") {
  Detector<double> det(tiny_config());
  det.init(13);
  Tensor<double> e(1, 8);
  std::mt19937_64 rng(14);
  dfx::testing::fill_normal(e, rng);
  det.classifier().bias.value.zero();
  const double l = det.classify_logit(e)[0];
  Tensor<double> e3 = e;
  for (auto& x : e3.storage()) x *= 3.0;
  CHECK(det.classify_logit(e3)[0] == doctest::Approx(3.0 * l).epsilon(1e-12));
  det.classifier().weight.value.zero();
  CHECK(det.classify_logit(e)[0] == 0.0);
}

TEST_CASE("reparameterize") {
  EmbeddingDistribution<double> d{Tensor<double>(1, 3, 0.5), Tensor<double>(1, 3, 2.0)};
  const auto z0 = reparameterize(d, Tensor<double>(1, 3, 0.0));
  CHECK(z0 == d.mu);
  const auto z1 = reparameterize(d, Tensor<double>(1, 3, 1.0));
  for (double x : z1.storage()) CHECK(x == 2.5);
}

TEST_CASE("detector gradients match finite differences for every ablation mode") {
  struct Mode {
    bool need_z, sample, adapter;
  };
  for (const Mode m : {Mode{false, false, false}, Mode{true, false, false},
                       Mode{true, true, false}, Mode{true, true, true},
                       Mode{true, false, true}}) {
    INFO("need_z=" << m.need_z << " sample=" << m.sample << " adapter=" << m.adapter);
    Detector<double> det(tiny_config());
    det.init(20);
    std::mt19937_64 rng(21);
    const auto imgs = random_images(3, 16, rng);
    const auto p = ptrs(imgs);
    ForwardOptions opt;
    opt.need_z = m.need_z;
    opt.sample = m.sample;
    opt.use_adapter = m.adapter;
    Tensor<double> eps(3, 8), rz(3, 8), rmu(3, 8), rs(3, 8);
    dfx::testing::fill_normal(eps, rng);
    dfx::testing::fill_normal(rz, rng);
    dfx::testing::fill_normal(rmu, rng);
    dfx::testing::fill_normal(rs, rng);
    const std::vector<double> c{0.7, -1.3, 0.4};
    auto loss = [&] {
      const auto o = det.forward(p, opt, &eps, nullptr);
      double s = 0;
      for (int b = 0; b < 3; ++b) s += c[static_cast<std::size_t>(b)] * o.logits[static_cast<std::size_t>(b)];
      if (m.need_z)
        for (std::size_t i = 0; i < o.z.size(); ++i) s += rz[i] * o.z[i] + rmu[i] * o.mu[i];
      if (m.sample)
        for (std::size_t i = 0; i < o.sigma.size(); ++i) s += rs[i] * o.sigma[i];
      return s;
    };
    auto params = det.parameters();
    dfx::nn::zero_grads(params);
    Detector<double>::Cache cache;
    const auto out = det.forward(p, opt, &eps, &cache);
    DetectorGrads<double> g;
    g.dlogit = c;
    if (m.need_z) {
      g.dz = rz;
      g.dmu = rmu;
    }
    if (m.sample) g.dsigma = rs;
    det.backward(cache, out, g);
    params.pop_back();  // temperature is not used by the detector forward
    CHECK(dfx::testing::max_param_grad_error(params, loss, 1e-5, 3) < 1e-4);
  }
}

TEST_CASE("gradients reach every trainable part in the full configuration") {
  Detector<float> det(tiny_config());
  det.init(30);
  std::mt19937_64 rng(31);
  const auto imgs = random_images(4, 16, rng);
  ForwardOptions opt{true, true, true, false};
  Tensor<float> eps(4, 8, 0.3f);
  auto params = det.parameters();
  dfx::nn::zero_grads(params);
  Detector<float>::Cache cache;
  const auto out = det.forward(ptrs(imgs), opt, &eps, &cache);
  DetectorGrads<float> g;
  g.dlogit = {0.1f, -0.2f, 0.3f, -0.1f};
  g.dz = Tensor<float>(4, 8, 0.05f);
  det.backward(cache, out, g);
  CHECK(dfx::nn::grad_norm(det.backbone_parameters()) > 0);
  CHECK(dfx::nn::grad_norm(det.mu_parameters()) > 0);
  CHECK(dfx::nn::grad_norm(det.sigma_parameters()) > 0);
  CHECK(dfx::nn::grad_norm(det.statistical_parameters()) > 0);
  CHECK(dfx::nn::grad_norm(det.gate_parameters()) > 0);
  CHECK(dfx::nn::grad_norm(det.classifier_parameters()) > 0);
}

TEST_CASE("text encoder is deterministic, frozen and discriminative") {
  TextEncoder te;
  const auto sum = te.checksum();
  const auto a = te.encode("The eyes are misaligned.");
  CHECK(a.size() == 128u);
  CHECK(te.encode("The eyes are misaligned.") == a);
  TextEncoder te2;
  CHECK(te2.encode("The eyes are misaligned.") == a);
  CHECK(te.encode("eyes are misaligned") != te.encode("mouth looks blurry"));
  CHECK_THROWS_AS(te.encode(""), dfx::DegenerateInputError);
  CHECK_THROWS_AS(te.encode(" ... "), dfx::DegenerateInputError);
  CHECK(te.checksum() == sum);
  CHECK(text_words("Hello, World! x2") == std::vector<std::string>{"hello", "world", "x2"});
}
