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

#include "dfx/kernels/kernels_avx2.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace dfx::kernels::avx2 {
namespace {

constexpr int kRowBlock = 6;
constexpr int kDepthBlock = 256;

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline float hmax(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_max_ps(lo, hi);
  lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_max_ss(lo, _mm_movehdup_ps(lo));
  return _mm_cvtss_f32(lo);
}

inline __m256i tail_mask(int count) {
  alignas(32) static const int32_t kMask[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                               0,  0,  0,  0,  0,  0,  0,  0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMask + 8 - count));
}

// Cephes-style single precision exp.
inline __m256 exp_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f),
                              _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500E-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507E-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073E-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894E-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459E-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201E-1f));
  y = _mm256_fmadd_ps(y, z, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));
  __m256i n = _mm256_cvttps_epi32(fx);
  n = _mm256_add_epi32(n, _mm256_set1_epi32(127));
  n = _mm256_slli_epi32(n, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

inline __m256 tanh_ps(__m256 u) {
  // 1 - 2 / (exp(2u) + 1)
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 e = exp_ps(_mm256_add_ps(u, u));
  return _mm256_sub_ps(one, _mm256_div_ps(_mm256_set1_ps(2.0f),
                                          _mm256_add_ps(e, one)));
}

inline void store_c(float* c, __m256 acc, float alpha, float beta) {
  const __m256 va = _mm256_set1_ps(alpha);
  if (beta == 0.0f) {
    _mm256_storeu_ps(c, _mm256_mul_ps(acc, va));
  } else {
    const __m256 old = _mm256_loadu_ps(c);
    _mm256_storeu_ps(c, _mm256_fmadd_ps(acc, va,
                                        _mm256_mul_ps(old, _mm256_set1_ps(beta))));
  }
}

inline void store_c_masked(float* c, __m256 acc, float alpha, float beta,
                           __m256i mask) {
  const __m256 va = _mm256_set1_ps(alpha);
  if (beta == 0.0f) {
    _mm256_maskstore_ps(c, mask, _mm256_mul_ps(acc, va));
  } else {
    const __m256 old = _mm256_maskload_ps(c, mask);
    _mm256_maskstore_ps(
        c, mask,
        _mm256_fmadd_ps(acc, va, _mm256_mul_ps(old, _mm256_set1_ps(beta))));
  }
}

// MR rows x 16 columns of C.
template <int MR>
void micro_16(int k, const float* a, int lda, const float* b, int ldb,
              float* c, int ldc, float alpha, float beta) {
  __m256 acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) {
    acc0[r] = _mm256_setzero_ps();
    acc1[r] = _mm256_setzero_ps();
  }
  for (int p = 0; p < k; ++p) {
    const float* bp = b + static_cast<std::ptrdiff_t>(p) * ldb;
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<std::ptrdiff_t>(r) * lda + p);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    float* cr = c + static_cast<std::ptrdiff_t>(r) * ldc;
    store_c(cr, acc0[r], alpha, beta);
    store_c(cr + 8, acc1[r], alpha, beta);
  }
}

// MR rows x `cols` (1..8) columns of C.
template <int MR>
void micro_8(int k, const float* a, int lda, const float* b, int ldb,
             float* c, int ldc, float alpha, float beta, int cols) {
  const __m256i mask = tail_mask(cols);
  const bool full = cols == 8;
  __m256 acc[MR];
  for (int r = 0; r < MR; ++r) acc[r] = _mm256_setzero_ps();
  for (int p = 0; p < k; ++p) {
    const float* bp = b + static_cast<std::ptrdiff_t>(p) * ldb;
    const __m256 b0 = full ? _mm256_loadu_ps(bp) : _mm256_maskload_ps(bp, mask);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<std::ptrdiff_t>(r) * lda + p);
      acc[r] = _mm256_fmadd_ps(av, b0, acc[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    float* cr = c + static_cast<std::ptrdiff_t>(r) * ldc;
    if (full)
      store_c(cr, acc[r], alpha, beta);
    else
      store_c_masked(cr, acc[r], alpha, beta, mask);
  }
}

template <int MR>
void row_panel(int n, int k, const float* a, int lda, const float* b, int ldb,
               float* c, int ldc, float alpha, float beta) {
  int j = 0;
  for (; j + 16 <= n; j += 16)
    micro_16<MR>(k, a, lda, b + j, ldb, c + j, ldc, alpha, beta);
  for (; j < n; j += 8)
    micro_8<MR>(k, a, lda, b + j, ldb, c + j, ldc, alpha, beta,
                std::min(8, n - j));
}

void row_panel_dispatch(int rows, int n, int k, const float* a, int lda,
                        const float* b, int ldb, float* c, int ldc,
                        float alpha, float beta) {
  switch (rows) {
    case 6: row_panel<6>(n, k, a, lda, b, ldb, c, ldc, alpha, beta); break;
    case 5: row_panel<5>(n, k, a, lda, b, ldb, c, ldc, alpha, beta); break;
    case 4: row_panel<4>(n, k, a, lda, b, ldb, c, ldc, alpha, beta); break;
    case 3: row_panel<3>(n, k, a, lda, b, ldb, c, ldc, alpha, beta); break;
    case 2: row_panel<2>(n, k, a, lda, b, ldb, c, ldc, alpha, beta); break;
    default: row_panel<1>(n, k, a, lda, b, ldb, c, ldc, alpha, beta); break;
  }
}

void transpose(int rows, int cols, const float* src, int ld, float* dst) {
  // dst is cols x rows, contiguous.
  constexpr int kTile = 16;
  for (int i0 = 0; i0 < rows; i0 += kTile) {
    const int i1 = std::min(rows, i0 + kTile);
    for (int j0 = 0; j0 < cols; j0 += kTile) {
      const int j1 = std::min(cols, j0 + kTile);
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j)
          dst[static_cast<std::ptrdiff_t>(j) * rows + i] =
              src[static_cast<std::ptrdiff_t>(i) * ld + j];
    }
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
  if (m <= 0 || n <= 0) return;
  if (alpha == 0.0f || k <= 0) {
    for (int i = 0; i < m; ++i) {
      float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
      if (beta == 0.0f)
        std::fill(cr, cr + n, 0.0f);
      else
        scale(static_cast<std::size_t>(n), beta, cr);
    }
    return;
  }
  thread_local std::vector<float> pack_a, pack_b;
  if (trans_a) {
    pack_a.resize(static_cast<std::size_t>(m) * k);
    transpose(k, m, a, lda, pack_a.data());
    a = pack_a.data();
    lda = k;
  }
  if (trans_b) {
    pack_b.resize(static_cast<std::size_t>(k) * n);
    transpose(n, k, b, ldb, pack_b.data());
    b = pack_b.data();
    ldb = n;
  }
  for (int pc = 0; pc < k; pc += kDepthBlock) {
    const int kc = std::min(kDepthBlock, k - pc);
    const float beta_eff = pc == 0 ? beta : 1.0f;
    for (int i = 0; i < m; i += kRowBlock) {
      const int rows = std::min(kRowBlock, m - i);
      row_panel_dispatch(rows, n, kc, a + static_cast<std::ptrdiff_t>(i) * lda + pc,
                         lda, b + static_cast<std::ptrdiff_t>(pc) * ldb, ldb,
                         c + static_cast<std::ptrdiff_t>(i) * ldc, ldc, alpha,
                         beta_eff);
    }
  }
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                            _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(std::size_t n, float alpha, float* x) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

float dot(std::size_t n, const float* x, const float* y) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void exp(std::size_t n, const float* x, float* y) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, exp_ps(_mm256_loadu_ps(x + i)));
  if (i < n) {
    const __m256i mask = tail_mask(static_cast<int>(n - i));
    _mm256_maskstore_ps(y + i, mask, exp_ps(_mm256_maskload_ps(x + i, mask)));
  }
}

void softmax(std::size_t n, float* x) {
  if (n == 0) return;
  std::size_t i = 0;
  __m256 vmax = _mm256_set1_ps(-INFINITY);
  for (; i + 8 <= n; i += 8) vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(x + i));
  float mx = hmax(vmax);
  for (; i < n; ++i) mx = std::max(mx, x[i]);
  const __m256 vm = _mm256_set1_ps(mx);
  __m256 vsum = _mm256_setzero_ps();
  i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 e = exp_ps(_mm256_sub_ps(_mm256_loadu_ps(x + i), vm));
    _mm256_storeu_ps(x + i, e);
    vsum = _mm256_add_ps(vsum, e);
  }
  float sum = hsum(vsum);
  if (i < n) {
    const __m256i mask = tail_mask(static_cast<int>(n - i));
    __m256 e = exp_ps(_mm256_sub_ps(_mm256_maskload_ps(x + i, mask), vm));
    e = _mm256_and_ps(e, _mm256_castsi256_ps(mask));
    _mm256_maskstore_ps(x + i, mask, e);
    sum += hsum(e);
  }
  scale(n, 1.0f / sum, x);
}

void softmax_backward(std::size_t n, const float* p, const float* dp,
                      float* dx) {
  const float s = dot(n, p, dp);
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(dx + i, _mm256_mul_ps(_mm256_loadu_ps(p + i),
                                           _mm256_sub_ps(_mm256_loadu_ps(dp + i), vs)));
  for (; i < n; ++i) dx[i] = p[i] * (dp[i] - s);
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;
constexpr float kGeluA = 0.044715f;
}  // namespace

void gelu(std::size_t n, const float* x, float* y) {
  const __m256 c = _mm256_set1_ps(kGeluC), a = _mm256_set1_ps(kGeluA);
  const __m256 half = _mm256_set1_ps(0.5f), one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 v3 = _mm256_mul_ps(_mm256_mul_ps(v, v), v);
    const __m256 u = _mm256_mul_ps(c, _mm256_fmadd_ps(a, v3, v));
    const __m256 t = tanh_ps(u);
    _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_mul_ps(half, v), _mm256_add_ps(one, t)));
  }
  for (; i < n; ++i) {
    const float v = x[i];
    y[i] = 0.5f * v * (1.0f + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
}

void gelu_backward(std::size_t n, const float* x, const float* dy, float* dx) {
  const __m256 c = _mm256_set1_ps(kGeluC), a = _mm256_set1_ps(kGeluA);
  const __m256 a3 = _mm256_set1_ps(3.0f * kGeluA);
  const __m256 half = _mm256_set1_ps(0.5f), one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 v2 = _mm256_mul_ps(v, v);
    const __m256 u = _mm256_mul_ps(c, _mm256_fmadd_ps(_mm256_mul_ps(a, v2), v, v));
    const __m256 t = tanh_ps(u);
    const __m256 du = _mm256_mul_ps(c, _mm256_fmadd_ps(a3, v2, one));
    const __m256 sech2 = _mm256_fnmadd_ps(t, t, one);
    const __m256 g = _mm256_fmadd_ps(
        _mm256_mul_ps(_mm256_mul_ps(half, v), sech2), du,
        _mm256_mul_ps(half, _mm256_add_ps(one, t)));
    _mm256_storeu_ps(dx + i, _mm256_mul_ps(_mm256_loadu_ps(dy + i), g));
  }
  for (; i < n; ++i) {
    const float v = x[i];
    const float u = kGeluC * (v + kGeluA * v * v * v);
    const float th = std::tanh(u);
    const float du = kGeluC * (1.0f + 3.0f * kGeluA * v * v);
    dx[i] = dy[i] * (0.5f * (1.0f + th) + 0.5f * v * (1.0f - th * th) * du);
  }
}

void layernorm(int rows, int cols, const float* x, const float* gamma,
               const float* beta, float eps, float* y, float* mean,
               float* rstd) {
  const std::size_t nc = static_cast<std::size_t>(cols);
  for (int r = 0; r < rows; ++r) {
    const float* xr = x + static_cast<std::ptrdiff_t>(r) * cols;
    float* yr = y + static_cast<std::ptrdiff_t>(r) * cols;
    __m256 vs = _mm256_setzero_ps();
    std::size_t j = 0;
    for (; j + 8 <= nc; j += 8) vs = _mm256_add_ps(vs, _mm256_loadu_ps(xr + j));
    float s = hsum(vs);
    for (; j < nc; ++j) s += xr[j];
    const float mu = s / static_cast<float>(cols);
    const __m256 vmu = _mm256_set1_ps(mu);
    __m256 vv = _mm256_setzero_ps();
    j = 0;
    for (; j + 8 <= nc; j += 8) {
      const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(xr + j), vmu);
      vv = _mm256_fmadd_ps(d, d, vv);
    }
    float var = hsum(vv);
    for (; j < nc; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<float>(cols);
    const float rs = 1.0f / std::sqrt(var + eps);
    const __m256 vrs = _mm256_set1_ps(rs);
    j = 0;
    for (; j + 8 <= nc; j += 8) {
      const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + j), vmu), vrs);
      _mm256_storeu_ps(yr + j, _mm256_fmadd_ps(xhat, _mm256_loadu_ps(gamma + j),
                                               _mm256_loadu_ps(beta + j)));
    }
    for (; j < nc; ++j) yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
    mean[r] = mu;
    rstd[r] = rs;
  }
}

void layernorm_backward(int rows, int cols, const float* x, const float* gamma,
                        const float* mean, const float* rstd, const float* dy,
                        float* dx, float* dgamma, float* dbeta) {
  const std::size_t nc = static_cast<std::size_t>(cols);
  const float inv_n = 1.0f / static_cast<float>(cols);
  for (int r = 0; r < rows; ++r) {
    const float* xr = x + static_cast<std::ptrdiff_t>(r) * cols;
    const float* dyr = dy + static_cast<std::ptrdiff_t>(r) * cols;
    float* dxr = dx + static_cast<std::ptrdiff_t>(r) * cols;
    const __m256 vmu = _mm256_set1_ps(mean[r]);
    const __m256 vrs = _mm256_set1_ps(rstd[r]);
    __m256 vg = _mm256_setzero_ps(), vgx = _mm256_setzero_ps();
    std::size_t j = 0;
    for (; j + 8 <= nc; j += 8) {
      const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + j), vmu), vrs);
      const __m256 d = _mm256_loadu_ps(dyr + j);
      const __m256 g = _mm256_mul_ps(d, _mm256_loadu_ps(gamma + j));
      vg = _mm256_add_ps(vg, g);
      vgx = _mm256_fmadd_ps(g, xhat, vgx);
      _mm256_storeu_ps(dgamma + j, _mm256_fmadd_ps(d, xhat, _mm256_loadu_ps(dgamma + j)));
      _mm256_storeu_ps(dbeta + j, _mm256_add_ps(d, _mm256_loadu_ps(dbeta + j)));
    }
    float sum_g = hsum(vg), sum_gx = hsum(vgx);
    for (; j < nc; ++j) {
      const float xhat = (xr[j] - mean[r]) * rstd[r];
      const float g = dyr[j] * gamma[j];
      sum_g += g;
      sum_gx += g * xhat;
      dgamma[j] += dyr[j] * xhat;
      dbeta[j] += dyr[j];
    }
    const __m256 vmg = _mm256_set1_ps(inv_n * sum_g);
    const __m256 vmgx = _mm256_set1_ps(inv_n * sum_gx);
    j = 0;
    for (; j + 8 <= nc; j += 8) {
      const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + j), vmu), vrs);
      const __m256 g = _mm256_mul_ps(_mm256_loadu_ps(dyr + j), _mm256_loadu_ps(gamma + j));
      const __m256 t = _mm256_fnmadd_ps(xhat, vmgx, _mm256_sub_ps(g, vmg));
      _mm256_storeu_ps(dxr + j, _mm256_mul_ps(vrs, t));
    }
    for (; j < nc; ++j) {
      const float xhat = (xr[j] - mean[r]) * rstd[r];
      const float g = dyr[j] * gamma[j];
      dxr[j] = rstd[r] * (g - inv_n * sum_g - xhat * inv_n * sum_gx);
    }
  }
}

void add_row_bias(int rows, int cols, const float* bias, float* y, int ldy) {
  for (int r = 0; r < rows; ++r)
    axpy(static_cast<std::size_t>(cols), 1.0f, bias,
         y + static_cast<std::ptrdiff_t>(r) * ldy);
}

void column_sum(int rows, int cols, const float* x, int ldx, float* out) {
  for (int r = 0; r < rows; ++r)
    axpy(static_cast<std::size_t>(cols), 1.0f,
         x + static_cast<std::ptrdiff_t>(r) * ldx, out);
}

void adam_step(std::size_t n, float* param, const float* grad, float* m,
               float* v, float lr, float beta1, float beta2, float eps,
               float bias_correction1, float bias_correction2) {
  const __m256 b1 = _mm256_set1_ps(beta1), b2 = _mm256_set1_ps(beta2);
  const __m256 omb1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 omb2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 inv_bc1 = _mm256_set1_ps(1.0f / bias_correction1);
  const __m256 inv_bc2 = _mm256_set1_ps(1.0f / bias_correction2);
  const __m256 veps = _mm256_set1_ps(eps), vlr = _mm256_set1_ps(lr);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_fmadd_ps(b1, _mm256_loadu_ps(m + i), _mm256_mul_ps(omb1, g));
    const __m256 vi = _mm256_fmadd_ps(b2, _mm256_loadu_ps(v + i),
                                      _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, inv_bc2)), veps);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(vlr, _mm256_mul_ps(mi, inv_bc1)), denom);
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  for (; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + (1.0f - beta1) * g;
    v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
    param[i] -= lr * (m[i] / bias_correction1) /
                (std::sqrt(v[i] / bias_correction2) + eps);
  }
}

}  // namespace dfx::kernels::avx2
