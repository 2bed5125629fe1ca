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

#include "dfx/nn/transformer.hpp"

#include <cmath>
#include <cstring>

#include "dfx/kernels/kernels.hpp"

namespace dfx::nn {

template <typename T>
Tensor<T> first_rows(const Tensor<T>& x, int batch, int seq) {
  Tensor<T> out(batch, x.cols());
  for (int b = 0; b < batch; ++b)
    std::memcpy(out.row(b), x.row(b * seq), sizeof(T) * x.cols());
  return out;
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(std::string name, int dim, int heads,
                                          bool causal)
    : w_qkv(name + ".qkv.weight", 3 * dim, dim),
      b_qkv(name + ".qkv.bias", 1, 3 * dim),
      w_out(name + ".out.weight", dim, dim),
      b_out(name + ".out.bias", 1, dim),
      dim_(dim),
      heads_(heads),
      causal_(causal) {
  if (heads <= 0 || dim % heads != 0)
    throw ConfigError("attention dim " + std::to_string(dim) +
                      " not divisible by heads " + std::to_string(heads));
}

template <typename T>
void MultiHeadAttention<T>::init(Rng& rng, double stddev) {
  w_qkv.fill_normal(rng, stddev);
  w_out.fill_normal(rng, stddev);
  b_qkv.value.zero();
  b_out.value.zero();
}

template <typename T>
void MultiHeadAttention<T>::forward(const Tensor<T>& x, int batch, int seq,
                                    QueryRows rows, AttentionCache<T>& cache,
                                    Tensor<T>& out) const {
  const int d = dim_, hd = d / heads_;
  if (x.cols() != d || x.rows() != batch * seq)
    throw ShapeError("attention " + w_qkv.name + ": input shape mismatch");
  const bool all = rows == QueryRows::kAll;
  const int q_len = all ? seq : 1;
  const int nq = batch * q_len;
  cache.batch = batch;
  cache.seq = seq;
  cache.q_len = q_len;
  if (all)
    cache.xq = Tensor<T>();
  else
    cache.xq = first_rows(x, batch, seq);
  const Tensor<T>& xq = all ? x : cache.xq;

  const T* wq = w_qkv.value.data();
  const T* wkv = wq + static_cast<std::ptrdiff_t>(d) * d;
  cache.q.resize(nq, d);
  kernels::gemm(false, true, nq, d, d, T(1), xq.data(), d, wq, d, T(0),
                cache.q.data(), d);
  kernels::add_row_bias(nq, d, b_qkv.value.data(), cache.q.data(), d);
  cache.kv.resize(batch * seq, 2 * d);
  kernels::gemm(false, true, batch * seq, 2 * d, d, T(1), x.data(), d, wkv, d,
                T(0), cache.kv.data(), 2 * d);
  kernels::add_row_bias(batch * seq, 2 * d, b_qkv.value.data() + d,
                        cache.kv.data(), 2 * d);

  cache.probs.resize(batch * heads_ * q_len, seq);
  cache.ctx.resize(nq, d);
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads_; ++h) {
      const T* q = cache.q.row(b * q_len) + h * hd;
      const T* k = cache.kv.row(b * seq) + h * hd;
      const T* v = cache.kv.row(b * seq) + d + h * hd;
      T* p = cache.probs.row((b * heads_ + h) * q_len);
      kernels::gemm(false, true, q_len, seq, hd, scale, q, d, k, 2 * d, T(0), p,
                    seq);
      for (int i = 0; i < q_len; ++i) {
        T* pi = p + static_cast<std::ptrdiff_t>(i) * seq;
        const int valid = causal_ ? (all ? i + 1 : 1) : seq;
        kernels::softmax(static_cast<std::size_t>(valid), pi);
        std::fill(pi + valid, pi + seq, T(0));
      }
      kernels::gemm(false, false, q_len, hd, seq, T(1), p, seq, v, 2 * d, T(0),
                    cache.ctx.row(b * q_len) + h * hd, d);
    }
  }
  out.resize(nq, d);
  kernels::gemm(false, true, nq, d, d, T(1), cache.ctx.data(), d,
                w_out.value.data(), d, T(0), out.data(), d);
  kernels::add_row_bias(nq, d, b_out.value.data(), out.data(), d);
}

template <typename T>
void MultiHeadAttention<T>::backward(const Tensor<T>& x,
                                     const AttentionCache<T>& cache,
                                     const Tensor<T>& dout, Tensor<T>& dx,
                                     bool param_grads) {
  const int d = dim_, hd = d / heads_;
  const int batch = cache.batch, seq = cache.seq, q_len = cache.q_len;
  const int nq = batch * q_len;
  const bool all = q_len == seq && cache.xq.empty();
  const Tensor<T>& xq = all ? x : cache.xq;

  if (param_grads) {
    kernels::gemm(true, false, d, d, nq, T(1), dout.data(), d, cache.ctx.data(),
                  d, T(1), w_out.grad.data(), d);
    kernels::column_sum(nq, d, dout.data(), d, b_out.grad.data());
  }
  Tensor<T> dctx(nq, d);
  kernels::gemm(false, false, nq, d, d, T(1), dout.data(), d,
                w_out.value.data(), d, T(0), dctx.data(), d);

  Tensor<T> dq(nq, d);
  Tensor<T> dkv(batch * seq, 2 * d);
  Tensor<T> dp(q_len, seq);
  Tensor<T> ds(q_len, seq);
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads_; ++h) {
      const T* q = cache.q.row(b * q_len) + h * hd;
      const T* k = cache.kv.row(b * seq) + h * hd;
      const T* v = cache.kv.row(b * seq) + d + h * hd;
      const T* p = cache.probs.row((b * heads_ + h) * q_len);
      const T* dc = dctx.row(b * q_len) + h * hd;
      kernels::gemm(false, true, q_len, seq, hd, T(1), dc, d, v, 2 * d, T(0),
                    dp.data(), seq);
      kernels::gemm(true, false, seq, hd, q_len, T(1), p, seq, dc, d, T(0),
                    dkv.row(b * seq) + d + h * hd, 2 * d);
      for (int i = 0; i < q_len; ++i)
        kernels::softmax_backward(static_cast<std::size_t>(seq), p + i * seq,
                                  dp.row(i), ds.row(i));
      kernels::gemm(false, false, q_len, hd, seq, scale, ds.data(), seq, k,
                    2 * d, T(0), dq.row(b * q_len) + h * hd, d);
      kernels::gemm(true, false, seq, hd, q_len, scale, ds.data(), seq, q, d,
                    T(0), dkv.row(b * seq) + h * hd, 2 * d);
    }
  }

  const T* wq = w_qkv.value.data();
  const T* wkv = wq + static_cast<std::ptrdiff_t>(d) * d;
  if (param_grads) {
    kernels::gemm(true, false, d, d, nq, T(1), dq.data(), d, xq.data(), d, T(1),
                  w_qkv.grad.data(), d);
    kernels::gemm(true, false, 2 * d, d, batch * seq, T(1), dkv.data(), 2 * d,
                  x.data(), d, T(1),
                  w_qkv.grad.data() + static_cast<std::ptrdiff_t>(d) * d, d);
    kernels::column_sum(nq, d, dq.data(), d, b_qkv.grad.data());
    kernels::column_sum(batch * seq, 2 * d, dkv.data(), 2 * d,
                        b_qkv.grad.data() + d);
  }
  dx.resize(batch * seq, d);
  kernels::gemm(false, false, batch * seq, d, 2 * d, T(1), dkv.data(), 2 * d,
                wkv, d, T(0), dx.data(), d);
  if (all) {
    kernels::gemm(false, false, nq, d, d, T(1), dq.data(), d, wq, d, T(1),
                  dx.data(), d);
  } else {
    Tensor<T> dxq(nq, d);
    kernels::gemm(false, false, nq, d, d, T(1), dq.data(), d, wq, d, T(0),
                  dxq.data(), d);
    for (int b = 0; b < batch; ++b)
      kernels::axpy(static_cast<std::size_t>(d), T(1), dxq.row(b), dx.row(b * seq));
  }
}

template <typename T>
void MultiHeadAttention<T>::forward_incremental(const Tensor<T>& x,
                                                KvCache<T>& kv,
                                                Tensor<T>& out) const {
  const int d = dim_, hd = d / heads_;
  const int n = x.rows();
  const int p0 = kv.length;
  if (kv.kv.rows() < p0 + n || kv.kv.cols() != 2 * d) {
    Tensor<T> grown(std::max(p0 + n, 2 * kv.kv.rows()), 2 * d);
    if (!kv.kv.empty())
      std::memcpy(grown.data(), kv.kv.data(),
                  sizeof(T) * static_cast<std::size_t>(p0) * 2 * d);
    kv.kv = std::move(grown);
  }
  const T* wq = w_qkv.value.data();
  const T* wkv = wq + static_cast<std::ptrdiff_t>(d) * d;
  Tensor<T> q(n, d);
  kernels::gemm(false, true, n, d, d, T(1), x.data(), d, wq, d, T(0), q.data(), d);
  kernels::add_row_bias(n, d, b_qkv.value.data(), q.data(), d);
  T* new_kv = kv.kv.row(p0);
  kernels::gemm(false, true, n, 2 * d, d, T(1), x.data(), d, wkv, d, T(0),
                new_kv, 2 * d);
  kernels::add_row_bias(n, 2 * d, b_qkv.value.data() + d, new_kv, 2 * d);

  const int total = p0 + n;
  Tensor<T> p(n, total);
  Tensor<T> ctx(n, d);
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  for (int h = 0; h < heads_; ++h) {
    kernels::gemm(false, true, n, total, hd, scale, q.data() + h * hd, d,
                  kv.kv.data() + h * hd, 2 * d, T(0), p.data(), total);
    for (int i = 0; i < n; ++i) {
      const int valid = causal_ ? p0 + i + 1 : total;
      kernels::softmax(static_cast<std::size_t>(valid), p.row(i));
      std::fill(p.row(i) + valid, p.row(i) + total, T(0));
    }
    kernels::gemm(false, false, n, hd, total, T(1), p.data(), total,
                  kv.kv.data() + d + h * hd, 2 * d, T(0), ctx.data() + h * hd, d);
  }
  kv.length = total;
  out.resize(n, d);
  kernels::gemm(false, true, n, d, d, T(1), ctx.data(), d, w_out.value.data(), d,
                T(0), out.data(), d);
  kernels::add_row_bias(n, d, b_out.value.data(), out.data(), d);
}

template <typename T>
TransformerBlock<T>::TransformerBlock(std::string name, int dim, int heads,
                                      int hidden, bool causal)
    : ln1(name + ".ln1", dim),
      attn(name + ".attn", dim, heads, causal),
      ln2(name + ".ln2", dim),
      fc1(name + ".fc1", dim, hidden),
      fc2(name + ".fc2", hidden, dim) {}

template <typename T>
void TransformerBlock<T>::init(Rng& rng, double stddev) {
  attn.init(rng, stddev);
  fc1.init(rng, stddev);
  fc2.init(rng, stddev);
}

template <typename T>
void TransformerBlock<T>::forward(const Tensor<T>& x, int batch, int seq,
                                  QueryRows rows, BlockCache<T>& cache,
                                  Tensor<T>& out) const {
  cache.rows = rows;
  ln1.forward(x, cache.a, cache.ln1);
  Tensor<T> att;
  attn.forward(cache.a, batch, seq, rows, cache.attn, att);
  if (rows == QueryRows::kAll)
    cache.x1 = x;
  else
    cache.x1 = first_rows(x, batch, seq);
  kernels::axpy(cache.x1.size(), T(1), att.data(), cache.x1.data());
  ln2.forward(cache.x1, cache.b, cache.ln2);
  fc1.forward(cache.b, cache.h);
  cache.g.resize(cache.h.rows(), cache.h.cols());
  kernels::gelu(cache.h.size(), cache.h.data(), cache.g.data());
  fc2.forward(cache.g, out);
  kernels::axpy(out.size(), T(1), cache.x1.data(), out.data());
}

template <typename T>
void TransformerBlock<T>::backward(const Tensor<T>& x, int batch, int seq,
                                   const BlockCache<T>& cache,
                                   const Tensor<T>& dout, Tensor<T>& dx,
                                   bool param_grads) {
  Tensor<T> dg;
  fc2.backward(cache.g, dout, &dg, param_grads);
  Tensor<T> dh(cache.h.rows(), cache.h.cols());
  kernels::gelu_backward(cache.h.size(), cache.h.data(), dg.data(), dh.data());
  Tensor<T> db;
  fc1.backward(cache.b, dh, &db, param_grads);
  Tensor<T> dx1;
  ln2.backward(cache.x1, cache.ln2, db, dx1, param_grads);
  kernels::axpy(dx1.size(), T(1), dout.data(), dx1.data());
  Tensor<T> da;
  attn.backward(cache.a, cache.attn, dx1, da, param_grads);
  ln1.backward(x, cache.ln1, da, dx, param_grads);
  if (cache.rows == QueryRows::kAll) {
    kernels::axpy(dx.size(), T(1), dx1.data(), dx.data());
  } else {
    for (int b = 0; b < batch; ++b)
      kernels::axpy(static_cast<std::size_t>(dx.cols()), T(1), dx1.row(b),
                    dx.row(b * seq));
  }
}

template <typename T>
void TransformerBlock<T>::forward_incremental(const Tensor<T>& x,
                                              KvCache<T>& kv,
                                              Tensor<T>& out) const {
  Tensor<T> a, att, b, h, g;
  NormStats<T> s1, s2;
  ln1.forward(x, a, s1);
  attn.forward_incremental(a, kv, att);
  Tensor<T> x1 = x;
  kernels::axpy(x1.size(), T(1), att.data(), x1.data());
  ln2.forward(x1, b, s2);
  fc1.forward(b, h);
  g.resize(h.rows(), h.cols());
  kernels::gelu(h.size(), h.data(), g.data());
  fc2.forward(g, out);
  kernels::axpy(out.size(), T(1), x1.data(), out.data());
}

template Tensor<float> first_rows(const Tensor<float>&, int, int);
template Tensor<double> first_rows(const Tensor<double>&, int, int);
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;
template class TransformerBlock<float>;
template class TransformerBlock<double>;

}  // namespace dfx::nn
