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

// Dense arithmetic kernels used by every layer. Each kernel has a scalar
// reference (kernels_scalar.hpp, templated so it also serves double) and an
// AVX2+FMA variant for float. The float entry points below dispatch at
// runtime; double always runs the scalar reference.
//
// All matrices are row-major. gemm follows BLAS semantics:
//   C[m x n] = alpha * op(A)[m x k] * op(B)[k x n] + beta * C
// where op(A) = A (stored m x k) or A^T (stored k x m) when trans_a is set.

#pragma once

#include <cstddef>
#include <string_view>

namespace dfx::kernels {

enum class Isa { kScalar, kAvx2 };

/// True when the running CPU has AVX2 and FMA.
bool cpu_supports_avx2();

/// The ISA selected for float kernels. Chosen once on first use: AVX2 when
/// supported, unless the environment variable DFX_SIMD=scalar forces the
/// reference path.
Isa active_isa();

/// Overrides the selection. Throws std::runtime_error if the CPU lacks the ISA.
void set_isa(Isa isa);

std::string_view isa_name(Isa isa);

// ---- float, dispatched ----------------------------------------------------

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

// ---- double, scalar reference ----------------------------------------------

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc);
void axpy(std::size_t n, double alpha, const double* x, double* y);
void scale(std::size_t n, double alpha, double* x);
double dot(std::size_t n, const double* x, const double* y);
void softmax(std::size_t n, double* x);
void softmax_backward(std::size_t n, const double* p, const double* dp,
                      double* dx);
void gelu(std::size_t n, const double* x, double* y);
void gelu_backward(std::size_t n, const double* x, const double* dy,
                   double* dx);
void layernorm(int rows, int cols, const double* x, const double* gamma,
               const double* beta, double eps, double* y, double* mean,
               double* rstd);
void layernorm_backward(int rows, int cols, const double* x,
                        const double* gamma, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dgamma, double* dbeta);
void add_row_bias(int rows, int cols, const double* bias, double* y, int ldy);
void column_sum(int rows, int cols, const double* x, int ldx, double* out);
void adam_step(std::size_t n, double* param, const double* grad, double* m,
               double* v, double lr, double beta1, double beta2, double eps,
               double bias_correction1, double bias_correction2);

}  // namespace dfx::kernels
