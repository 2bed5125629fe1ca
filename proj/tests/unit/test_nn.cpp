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
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"

#include "dfx/core/error.hpp"
#include "dfx/kernels/kernels.hpp"
#include "dfx/nn/adam.hpp"
#include "dfx/nn/checkpoint.hpp"
#include "dfx/nn/layers.hpp"
#include "dfx/nn/transformer.hpp"

using dfx::Tensor;
using namespace dfx::nn;
using dfx::testing::fill_normal;
using dfx::testing::max_grad_error;
using dfx::testing::max_param_grad_error;

namespace {

double weighted_sum(const Tensor<double>& y, const Tensor<double>& r) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

}  // namespace

TEST_CASE("linear gradients match finite differences") {
  std::mt19937_64 rng(3);
  Linear<double> lin("lin", 5, 4);
  lin.init(rng, 0.5);
  fill_normal(lin.bias.value, rng);
  Tensor<double> x(3, 5), r(3, 4);
  fill_normal(x, rng);
  fill_normal(r, rng);
  auto loss = [&] {
    Tensor<double> y;
    lin.forward(x, y);
    return weighted_sum(y, r);
  };
  Tensor<double> dx;
  lin.weight.zero_grad();
  lin.bias.zero_grad();
  lin.backward(x, r, &dx);
  ParamList<double> ps;
  lin.collect(ps);
  CHECK(max_param_grad_error(ps, loss) < 1e-6);
  CHECK(max_grad_error(x.storage(), dx.storage(), loss) < 1e-6);
}

TEST_CASE("layernorm gradients match finite differences") {
  std::mt19937_64 rng(4);
  LayerNorm<double> ln("ln", 6);
  fill_normal(ln.gamma.value, rng);
  fill_normal(ln.beta.value, rng);
  Tensor<double> x(4, 6), r(4, 6);
  fill_normal(x, rng, 2.0);
  fill_normal(r, rng);
  auto loss = [&] {
    Tensor<double> y;
    NormStats<double> st;
    ln.forward(x, y, st);
    return weighted_sum(y, r);
  };
  Tensor<double> y, dx;
  NormStats<double> st;
  ln.forward(x, y, st);
  ln.backward(x, st, r, dx);
  ParamList<double> ps;
  ln.collect(ps);
  CHECK(max_param_grad_error(ps, loss) < 1e-6);
  CHECK(max_grad_error(x.storage(), dx.storage(), loss) < 1e-6);
}

TEST_CASE("attention and block gradients match finite differences") {
  for (bool causal : {false, true}) {
    for (auto rows : {QueryRows::kAll, QueryRows::kFirstRow}) {
      if (causal && rows == QueryRows::kFirstRow) continue;
      INFO("causal=" << causal << " first_row=" << (rows == QueryRows::kFirstRow));
      std::mt19937_64 rng(5);
      const int batch = 2, seq = 4, dim = 8;
      TransformerBlock<double> blk("blk", dim, 2, 12, causal);
      blk.init(rng, 0.4);
      ParamList<double> ps;
      blk.collect(ps);
      for (auto* p : ps)
        if (p->name.find("bias") != std::string::npos ||
            p->name.find("beta") != std::string::npos)
          fill_normal(p->value, rng, 0.1);
      Tensor<double> x(batch * seq, dim);
      fill_normal(x, rng);
      const int out_rows = rows == QueryRows::kAll ? batch * seq : batch;
      Tensor<double> r(out_rows, dim);
      fill_normal(r, rng);
      auto loss = [&] {
        BlockCache<double> c;
        Tensor<double> y;
        blk.forward(x, batch, seq, rows, c, y);
        return weighted_sum(y, r);
      };
      zero_grads(ps);
      BlockCache<double> cache;
      Tensor<double> y, dx;
      blk.forward(x, batch, seq, rows, cache, y);
      CHECK(y.rows() == out_rows);
      blk.backward(x, batch, seq, cache, r, dx);
      CHECK(max_param_grad_error(ps, loss) < 1e-5);
      CHECK(max_grad_error(x.storage(), dx.storage(), loss) < 1e-5);
    }
  }
}

TEST_CASE("first-row block output equals row 0 of the full output") {
  std::mt19937_64 rng(6);
  TransformerBlock<double> blk("b", 8, 2, 16, false);
  blk.init(rng, 0.3);
  Tensor<double> x(3 * 5, 8);
  fill_normal(x, rng);
  BlockCache<double> c1, c2;
  Tensor<double> full, first;
  blk.forward(x, 3, 5, QueryRows::kAll, c1, full);
  blk.forward(x, 3, 5, QueryRows::kFirstRow, c2, first);
  const auto expected = first_rows(full, 3, 5);
  for (std::size_t i = 0; i < first.size(); ++i)
    CHECK(first[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("incremental causal decoding equals the full causal forward") {
  std::mt19937_64 rng(7);
  TransformerBlock<double> blk("b", 8, 2, 16, true);
  blk.init(rng, 0.3);
  const int seq = 6;
  Tensor<double> x(seq, 8);
  fill_normal(x, rng);
  BlockCache<double> c;
  Tensor<double> full;
  blk.forward(x, 1, seq, QueryRows::kAll, c, full);

  KvCache<double> kv;
  Tensor<double> prefix(3, 8), out;
  std::copy(x.data(), x.data() + 3 * 8, prefix.data());
  blk.forward_incremental(prefix, kv, out);
  for (int i = 0; i < 3 * 8; ++i) CHECK(out[i] == doctest::Approx(full[i]).epsilon(1e-12));
  for (int t = 3; t < seq; ++t) {
    Tensor<double> one(1, 8);
    std::copy(x.row(t), x.row(t) + 8, one.data());
    blk.forward_incremental(one, kv, out);
    for (int j = 0; j < 8; ++j) CHECK(out[j] == doctest::Approx(full(t, j)).epsilon(1e-12));
  }
  CHECK(kv.length == seq);
}

TEST_CASE("causal attention ignores future positions") {
  std::mt19937_64 rng(8);
  MultiHeadAttention<double> att("a", 8, 2, true);
  att.init(rng, 0.5);
  Tensor<double> x(5, 8);
  fill_normal(x, rng);
  AttentionCache<double> c;
  Tensor<double> y1, y2;
  att.forward(x, 1, 5, QueryRows::kAll, c, y1);
  for (int j = 0; j < 8; ++j) x(4, j) += 1.0;
  att.forward(x, 1, 5, QueryRows::kAll, c, y2);
  for (int i = 0; i < 4 * 8; ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("adam takes a bias-corrected first step of size lr") {
  Param<float> p("p", 1, 3);
  p.grad[0] = 2.0f;
  p.grad[1] = -0.5f;
  p.grad[2] = 0.0f;
  Adam<float> opt({&p});
  opt.step(0.1);
  CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-5));
  CHECK(p.value[1] == doctest::Approx(0.1).epsilon(1e-5));
  CHECK(p.value[2] == 0.0f);
  CHECK(opt.steps() == 1);
}

TEST_CASE("gradient clipping bounds the global norm") {
  Param<float> a("a", 1, 2), b("b", 1, 1);
  a.grad[0] = 3.0f;
  a.grad[1] = 0.0f;
  b.grad[0] = 4.0f;
  ParamList<float> ps{&a, &b};
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(grad_norm(ps) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(clip_grad_norm(ps, 10.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(grad_norm(ps) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("checkpoint round trip restores values and rejects mismatches") {
  std::mt19937_64 rng(9);
  Linear<float> a("layer", 4, 3);
  a.init(rng, 1.0);
  ParamList<float> pa;
  a.collect(pa);
  const auto path = std::filesystem::temp_directory_path() / "dfx_test_ckpt.bin";
  save_checkpoint(path, {{"config", {{"k", 1}}}}, pa);

  Linear<float> b("layer", 4, 3);
  ParamList<float> pb;
  b.collect(pb);
  const auto manifest = load_checkpoint(path, pb);
  CHECK(manifest.at("config").at("k") == 1);
  CHECK(checksum(pa) == checksum(pb));
  CHECK(read_checkpoint_manifest(path).at("format") == "dfx-checkpoint/1");

  Linear<float> c("layer", 5, 3);
  ParamList<float> pc;
  c.collect(pc);
  CHECK_THROWS_AS(load_checkpoint(path, pc), dfx::ShapeError);
  std::filesystem::remove(path);
}
