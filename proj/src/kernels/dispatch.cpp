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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "dfx/kernels/kernels.hpp"
#include "dfx/kernels/kernels_scalar.hpp"

#if defined(DFX_HAVE_AVX2)
#include "dfx/kernels/kernels_avx2.hpp"
#endif

namespace dfx::kernels {
namespace {

struct FloatTable {
  decltype(&scalar::gemm<float>) gemm;
  decltype(&scalar::axpy<float>) axpy;
  decltype(&scalar::scale<float>) scale;
  decltype(&scalar::dot<float>) dot;
  decltype(&scalar::softmax<float>) softmax;
  decltype(&scalar::softmax_backward<float>) softmax_backward;
  decltype(&scalar::gelu<float>) gelu;
  decltype(&scalar::gelu_backward<float>) gelu_backward;
  decltype(&scalar::layernorm<float>) layernorm;
  decltype(&scalar::layernorm_backward<float>) layernorm_backward;
  decltype(&scalar::add_row_bias<float>) add_row_bias;
  decltype(&scalar::column_sum<float>) column_sum;
  decltype(&scalar::adam_step<float>) adam_step;
};

constexpr FloatTable kScalarTable{
    &scalar::gemm<float>,          &scalar::axpy<float>,
    &scalar::scale<float>,         &scalar::dot<float>,
    &scalar::softmax<float>,       &scalar::softmax_backward<float>,
    &scalar::gelu<float>,          &scalar::gelu_backward<float>,
    &scalar::layernorm<float>,     &scalar::layernorm_backward<float>,
    &scalar::add_row_bias<float>,  &scalar::column_sum<float>,
    &scalar::adam_step<float>,
};

#if defined(DFX_HAVE_AVX2)
constexpr FloatTable kAvx2Table{
    &avx2::gemm,         &avx2::axpy,          &avx2::scale,
    &avx2::dot,          &avx2::softmax,       &avx2::softmax_backward,
    &avx2::gelu,         &avx2::gelu_backward, &avx2::layernorm,
    &avx2::layernorm_backward, &avx2::add_row_bias, &avx2::column_sum,
    &avx2::adam_step,
};
#endif

Isa default_isa() {
  if (const char* env = std::getenv("DFX_SIMD")) {
    if (std::string(env) == "scalar") return Isa::kScalar;
  }
  return cpu_supports_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<const FloatTable*>& table_slot() {
  static std::atomic<const FloatTable*> slot{nullptr};
  return slot;
}

const FloatTable& table_for(Isa isa) {
#if defined(DFX_HAVE_AVX2)
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  (void)isa;
  return kScalarTable;
}

const FloatTable& table() {
  const FloatTable* t = table_slot().load(std::memory_order_acquire);
  if (t == nullptr) {
    t = &table_for(default_isa());
    table_slot().store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

bool cpu_supports_avx2() {
#if defined(DFX_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() {
  return &table() == &kScalarTable ? Isa::kScalar : Isa::kAvx2;
}

void set_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !cpu_supports_avx2())
    throw std::runtime_error("AVX2/FMA not available on this CPU or build");
  table_slot().store(&table_for(isa), std::memory_order_release);
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
  table().gemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void axpy(std::size_t n, float alpha, const float* x, float* y) {
  table().axpy(n, alpha, x, y);
}
void scale(std::size_t n, float alpha, float* x) { table().scale(n, alpha, x); }
float dot(std::size_t n, const float* x, const float* y) {
  return table().dot(n, x, y);
}
void softmax(std::size_t n, float* x) { table().softmax(n, x); }
void softmax_backward(std::size_t n, const float* p, const float* dp,
                      float* dx) {
  table().softmax_backward(n, p, dp, dx);
}
void gelu(std::size_t n, const float* x, float* y) { table().gelu(n, x, y); }
void gelu_backward(std::size_t n, const float* x, const float* dy, float* dx) {
  table().gelu_backward(n, x, dy, dx);
}
void layernorm(int rows, int cols, const float* x, const float* gamma,
               const float* beta, float eps, float* y, float* mean,
               float* rstd) {
  table().layernorm(rows, cols, x, gamma, beta, eps, y, mean, rstd);
}
void layernorm_backward(int rows, int cols, const float* x, const float* gamma,
                        const float* mean, const float* rstd, const float* dy,
                        float* dx, float* dgamma, float* dbeta) {
  table().layernorm_backward(rows, cols, x, gamma, mean, rstd, dy, dx, dgamma,
                             dbeta);
}
void add_row_bias(int rows, int cols, const float* bias, float* y, int ldy) {
  table().add_row_bias(rows, cols, bias, y, ldy);
}
void column_sum(int rows, int cols, const float* x, int ldx, float* out) {
  table().column_sum(rows, cols, x, ldx, out);
}
void adam_step(std::size_t n, float* param, const float* grad, float* m,
               float* v, float lr, float beta1, float beta2, float eps,
               float bias_correction1, float bias_correction2) {
  table().adam_step(n, param, grad, m, v, lr, beta1, beta2, eps,
                    bias_correction1, bias_correction2);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  scalar::gemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void axpy(std::size_t n, double alpha, const double* x, double* y) {
  scalar::axpy(n, alpha, x, y);
}
void scale(std::size_t n, double alpha, double* x) { scalar::scale(n, alpha, x); }
double dot(std::size_t n, const double* x, const double* y) {
  return scalar::dot(n, x, y);
}
void softmax(std::size_t n, double* x) { scalar::softmax(n, x); }
void softmax_backward(std::size_t n, const double* p, const double* dp,
                      double* dx) {
  scalar::softmax_backward(n, p, dp, dx);
}
void gelu(std::size_t n, const double* x, double* y) { scalar::gelu(n, x, y); }
void gelu_backward(std::size_t n, const double* x, const double* dy,
                   double* dx) {
  scalar::gelu_backward(n, x, dy, dx);
}
void layernorm(int rows, int cols, const double* x, const double* gamma,
               const double* beta, double eps, double* y, double* mean,
               double* rstd) {
  scalar::layernorm(rows, cols, x, gamma, beta, eps, y, mean, rstd);
}
void layernorm_backward(int rows, int cols, const double* x,
                        const double* gamma, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dgamma, double* dbeta) {
  scalar::layernorm_backward(rows, cols, x, gamma, mean, rstd, dy, dx, dgamma,
                             dbeta);
}
void add_row_bias(int rows, int cols, const double* bias, double* y, int ldy) {
  scalar::add_row_bias(rows, cols, bias, y, ldy);
}
void column_sum(int rows, int cols, const double* x, int ldx, double* out) {
  scalar::column_sum(rows, cols, x, ldx, out);
}
void adam_step(std::size_t n, double* param, const double* grad, double* m,
               double* v, double lr, double beta1, double beta2, double eps,
               double bias_correction1, double bias_correction2) {
  scalar::adam_step(n, param, grad, m, v, lr, beta1, beta2, eps,
                    bias_correction1, bias_correction2);
}

}  // namespace dfx::kernels
