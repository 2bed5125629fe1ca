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

// Multi-head self-attention and pre-norm transformer blocks operating on a
// batch of equal-length sequences stacked row-wise: (batch * seq) x dim.

#pragma once

#include <string>
#include <vector>

#include "dfx/core/rng.hpp"
#include "dfx/core/tensor.hpp"
#include "dfx/nn/layers.hpp"
#include "dfx/nn/param.hpp"

namespace dfx::nn {

/// Which query rows a layer produces. kFirstRow computes only row 0 of each
/// sequence (the class position) while still attending over every key.
enum class QueryRows { kAll, kFirstRow };

template <typename T>
struct AttentionCache {
  int batch = 0;
  int seq = 0;
  int q_len = 0;
  Tensor<T> xq;     // query-side inputs, (batch * q_len) x dim
  Tensor<T> q;      // (batch * q_len) x dim
  Tensor<T> kv;     // (batch * seq) x 2 dim
  Tensor<T> probs;  // (batch * heads * q_len) x seq
  Tensor<T> ctx;    // (batch * q_len) x dim
};

/// Keys/values of past positions for incremental decoding.
template <typename T>
struct KvCache {
  Tensor<T> kv;  // capacity x 2 dim
  int length = 0;
};

template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::string name, int dim, int heads, bool causal);

  int dim() const { return dim_; }
  int heads() const { return heads_; }
  bool causal() const { return causal_; }

  void init(Rng& rng, double stddev);

  void forward(const Tensor<T>& x, int batch, int seq, QueryRows rows,
               AttentionCache<T>& cache, Tensor<T>& out) const;
  /// dx is overwritten with the gradient w.r.t. x (all rows).
  void backward(const Tensor<T>& x, const AttentionCache<T>& cache,
                const Tensor<T>& dout, Tensor<T>& dx, bool param_grads = true);

  /// Single sequence: appends x's rows as new positions after kv.length.
  void forward_incremental(const Tensor<T>& x, KvCache<T>& kv,
                           Tensor<T>& out) const;

  void collect(ParamList<T>& out) {
    out.push_back(&w_qkv);
    out.push_back(&b_qkv);
    out.push_back(&w_out);
    out.push_back(&b_out);
  }

  Param<T> w_qkv;  // 3 dim x dim, rows [q; k; v]
  Param<T> b_qkv;  // 1 x 3 dim
  Param<T> w_out;  // dim x dim
  Param<T> b_out;  // 1 x dim

 private:
  int dim_ = 0;
  int heads_ = 1;
  bool causal_ = false;
};

template <typename T>
struct BlockCache {
  QueryRows rows = QueryRows::kAll;
  Tensor<T> a;  // ln1(x)
  NormStats<T> ln1;
  AttentionCache<T> attn;
  Tensor<T> x1;  // residual after attention
  Tensor<T> b;   // ln2(x1)
  NormStats<T> ln2;
  Tensor<T> h;  // fc1(b)
  Tensor<T> g;  // gelu(h)
};

/// Pre-norm block: x1 = x + Attn(LN1(x)); y = x1 + FC2(GELU(FC1(LN2(x1)))).
template <typename T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::string name, int dim, int heads, int hidden,
                   bool causal);

  int dim() const { return attn.dim(); }

  void init(Rng& rng, double stddev);

  /// Output rows are batch * seq for kAll, batch for kFirstRow.
  void forward(const Tensor<T>& x, int batch, int seq, QueryRows rows,
               BlockCache<T>& cache, Tensor<T>& out) const;
  void backward(const Tensor<T>& x, int batch, int seq,
                const BlockCache<T>& cache, const Tensor<T>& dout,
                Tensor<T>& dx, bool param_grads = true);

  void forward_incremental(const Tensor<T>& x, KvCache<T>& kv,
                           Tensor<T>& out) const;

  void collect(ParamList<T>& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    fc1.collect(out);
    fc2.collect(out);
  }

  LayerNorm<T> ln1;
  MultiHeadAttention<T> attn;
  LayerNorm<T> ln2;
  Linear<T> fc1;
  Linear<T> fc2;
};

/// Rows 0, seq, 2*seq, ... of x.
template <typename T>
Tensor<T> first_rows(const Tensor<T>& x, int batch, int seq);

}  // namespace dfx::nn
