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

// AVX2+FMA float kernels. Only call these when cpu_supports_avx2() is true;
// the translation unit defining them is compiled with -mavx2 -mfma.

#pragma once

#include <cstddef>

namespace dfx::kernels::avx2 {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void scale(std::size_t n, float alpha, float* x);
float dot(std::size_t n, const float* x, const float* y);
void softmax(std::size_t n, float* x);
void softmax_backward(std::size_t n, const float* p, const float* dp,
                      float* dx);
void gelu(std::size_t n, const float* x, float* y);
void gelu_backward(std::size_t n, const float* x, const float* dy, float* dx);
void layernorm(int rows, int cols, const float* x, const float* gamma,
               const float* beta, float eps, float* y, float* mean,
               float* rstd);
void layernorm_backward(int rows, int cols, const float* x, const float* gamma,
                        const float* mean, const float* rstd, const float* dy,
                        float* dx, float* dgamma, float* dbeta);
void add_row_bias(int rows, int cols, const float* bias, float* y, int ldy);
void column_sum(int rows, int cols, const float* x, int ldx, float* out);
void adam_step(std::size_t n, float* param, const float* grad, float* m,
               float* v, float lr, float beta1, float beta2, float eps,
               float bias_correction1, float bias_correction2);

/// Vectorized exp over a buffer; exposed for equivalence tests.
void exp(std::size_t n, const float* x, float* y);

}  // namespace dfx::kernels::avx2
