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

// Portable reference kernels. These define the semantics the SIMD variants
// are tested against.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace dfx::kernels::scalar {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha,
          const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (beta == T(0)) {
      std::fill(crow, crow + n, T(0));
    } else if (beta != T(1)) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
  }
  if (alpha == T(0) || k == 0) return;
  if (!trans_a && trans_b) {
    // Row-by-row dot products keep both operands contiguous.
    for (int i = 0; i < m; ++i) {
      const T* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
      T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
      for (int j = 0; j < n; ++j) {
        const T* brow = b + static_cast<std::ptrdiff_t>(j) * ldb;
        T s = 0;
        for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
        crow[j] += alpha * s;
      }
    }
    return;
  }
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const T aip = trans_a ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                            : a[static_cast<std::ptrdiff_t>(i) * lda + p];
      const T s = alpha * aip;
      if (s == T(0)) continue;
      if (!trans_b) {
        const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
      } else {
        for (int j = 0; j < n; ++j)
          crow[j] += s * b[static_cast<std::ptrdiff_t>(j) * ldb + p];
      }
    }
  }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(std::size_t n, T alpha, T* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void softmax(std::size_t n, T* x) {
  if (n == 0) return;
  const T mx = *std::max_element(x, x + n);
  T sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }
  const T inv = T(1) / sum;
  for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
}

// dx = p * (dp - <p, dp>)
template <typename T>
void softmax_backward(std::size_t n, const T* p, const T* dp, T* dx) {
  const T s = dot(n, p, dp);
  for (std::size_t i = 0; i < n; ++i) dx[i] = p[i] * (dp[i] - s);
}

// tanh-approximated GELU.
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

template <typename T>
void gelu(std::size_t n, const T* x, T* y) {
  const T c = T(kGeluC), a = T(kGeluA);
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x[i];
    y[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
  }
}

template <typename T>
void gelu_backward(std::size_t n, const T* x, const T* dy, T* dx) {
  const T c = T(kGeluC), a = T(kGeluA);
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x[i];
    const T u = c * (v + a * v * v * v);
    const T th = std::tanh(u);
    const T du = c * (T(1) + T(3) * a * v * v);
    const T g = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
    dx[i] = dy[i] * g;
  }
}

template <typename T>
void layernorm(int rows, int cols, const T* x, const T* gamma, const T* beta,
               T eps, T* y, T* mean, T* rstd) {
  for (int r = 0; r < rows; ++r) {
    const T* xr = x + static_cast<std::ptrdiff_t>(r) * cols;
    T* yr = y + static_cast<std::ptrdiff_t>(r) * cols;
    T mu = 0;
    for (int j = 0; j < cols; ++j) mu += xr[j];
    mu /= T(cols);
    T var = 0;
    for (int j = 0; j < cols; ++j) {
      const T d = xr[j] - mu;
      var += d * d;
    }
    var /= T(cols);
    const T rs = T(1) / std::sqrt(var + eps);
    for (int j = 0; j < cols; ++j)
      yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
    mean[r] = mu;
    rstd[r] = rs;
  }
}

// Accumulates into dgamma/dbeta; overwrites dx.
template <typename T>
void layernorm_backward(int rows, int cols, const T* x, const T* gamma,
                        const T* mean, const T* rstd, const T* dy, T* dx,
                        T* dgamma, T* dbeta) {
  for (int r = 0; r < rows; ++r) {
    const T* xr = x + static_cast<std::ptrdiff_t>(r) * cols;
    const T* dyr = dy + static_cast<std::ptrdiff_t>(r) * cols;
    T* dxr = dx + static_cast<std::ptrdiff_t>(r) * cols;
    const T mu = mean[r], rs = rstd[r];
    T sum_g = 0, sum_gx = 0;
    for (int j = 0; j < cols; ++j) {
      const T xhat = (xr[j] - mu) * rs;
      const T g = dyr[j] * gamma[j];
      sum_g += g;
      sum_gx += g * xhat;
      dgamma[j] += dyr[j] * xhat;
      dbeta[j] += dyr[j];
    }
    const T inv_n = T(1) / T(cols);
    for (int j = 0; j < cols; ++j) {
      const T xhat = (xr[j] - mu) * rs;
      const T g = dyr[j] * gamma[j];
      dxr[j] = rs * (g - inv_n * sum_g - xhat * inv_n * sum_gx);
    }
  }
}

template <typename T>
void add_row_bias(int rows, int cols, const T* bias, T* y, int ldy) {
  for (int r = 0; r < rows; ++r) {
    T* yr = y + static_cast<std::ptrdiff_t>(r) * ldy;
    for (int j = 0; j < cols; ++j) yr[j] += bias[j];
  }
}

// out[j] += sum_r x[r, j]
template <typename T>
void column_sum(int rows, int cols, const T* x, int ldx, T* out) {
  for (int r = 0; r < rows; ++r) {
    const T* xr = x + static_cast<std::ptrdiff_t>(r) * ldx;
    for (int j = 0; j < cols; ++j) out[j] += xr[j];
  }
}

template <typename T>
void adam_step(std::size_t n, T* param, const T* grad, T* m, T* v, T lr,
               T beta1, T beta2, T eps, T bias_correction1,
               T bias_correction2) {
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
    const T mhat = m[i] / bias_correction1;
    const T vhat = v[i] / bias_correction2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace dfx::kernels::scalar
