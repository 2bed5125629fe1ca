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

#include "dfx/kernels/kernels.hpp"
#include "dfx/kernels/kernels_scalar.hpp"
#if defined(DFX_HAVE_AVX2)
#include "dfx/kernels/kernels_avx2.hpp"
#endif

namespace k = dfx::kernels;

namespace {

std::vector<float> randv(std::size_t n, std::mt19937& rng, float scale = 1.0f) {
  std::normal_distribution<float> d(0.0f, scale);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b,
                 double rtol, double atol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tol = atol + rtol * std::abs(static_cast<double>(b[i]));
    INFO("index " << i << ": " << a[i] << " vs " << b[i]);
    CHECK(std::abs(static_cast<double>(a[i]) - b[i]) <= tol);
  }
}

}  // namespace

TEST_CASE("scalar gemm matches naive triple loop in double") {
  std::mt19937 rng(1);
  std::normal_distribution<double> d;
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      const int m = 5, n = 7, kk = 3;
      std::vector<double> a(m * kk), b(kk * n), c(m * n), ref(m * n);
      for (auto& x : a) x = d(rng);
      for (auto& x : b) x = d(rng);
      for (auto& x : c) x = d(rng);
      ref = c;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int p = 0; p < kk; ++p) {
            const double av = ta ? a[p * m + i] : a[i * kk + p];
            const double bv = tb ? b[j * kk + p] : b[p * n + j];
            s += av * bv;
          }
          ref[i * n + j] = 0.5 * s + 2.0 * ref[i * n + j];
        }
      }
      k::gemm(ta, tb, m, n, kk, 0.5, a.data(), ta ? m : kk, b.data(),
              tb ? kk : n, 2.0, c.data(), n);
      for (int i = 0; i < m * n; ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("dispatch selection can be forced") {
  k::set_isa(k::Isa::kScalar);
  CHECK(k::active_isa() == k::Isa::kScalar);
  if (k::cpu_supports_avx2()) {
    k::set_isa(k::Isa::kAvx2);
    CHECK(k::active_isa() == k::Isa::kAvx2);
  } else {
    CHECK_THROWS(k::set_isa(k::Isa::kAvx2));
  }
}

#if defined(DFX_HAVE_AVX2)

TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!k::cpu_supports_avx2()) {
    MESSAGE("AVX2 not available; skipping equivalence checks");
    return;
  }
  std::mt19937 rng(42);

  SUBCASE("gemm, all transpose modes and ragged sizes") {
    const int shapes[][3] = {{1, 1, 1}, {6, 16, 8}, {7, 17, 9}, {13, 33, 300},
                             {65, 128, 128}, {3, 5, 513}, {64, 9, 31}};
    for (const auto& s : shapes) {
      const int m = s[0], n = s[1], kk = s[2];
      for (int ta = 0; ta < 2; ++ta) {
        for (int tb = 0; tb < 2; ++tb) {
          for (float beta : {0.0f, 1.0f, 0.5f}) {
            const int lda = (ta ? m : kk) + 3, ldb = (tb ? kk : n) + 1, ldc = n + 2;
            auto a = randv(static_cast<std::size_t>(ta ? kk : m) * lda, rng);
            auto b = randv(static_cast<std::size_t>(tb ? n : kk) * ldb, rng);
            auto c0 = randv(static_cast<std::size_t>(m) * ldc, rng);
            auto c1 = c0;
            k::scalar::gemm<float>(ta, tb, m, n, kk, 0.75f, a.data(), lda,
                                   b.data(), ldb, beta, c0.data(), ldc);
            k::avx2::gemm(ta, tb, m, n, kk, 0.75f, a.data(), lda, b.data(), ldb,
                          beta, c1.data(), ldc);
            INFO("m=" << m << " n=" << n << " k=" << kk << " ta=" << ta
                      << " tb=" << tb << " beta=" << beta);
            check_close(c1, c0, 1e-4, 1e-4 * std::sqrt(static_cast<double>(kk)));
          }
        }
      }
    }
  }

  SUBCASE("vector kernels") {
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 64u, 1000u}) {
      auto x = randv(n, rng), y0 = randv(n, rng);
      auto y1 = y0;
      k::scalar::axpy<float>(n, 1.5f, x.data(), y0.data());
      k::avx2::axpy(n, 1.5f, x.data(), y1.data());
      check_close(y1, y0, 1e-6, 1e-6);

      k::scalar::scale<float>(n, -0.3f, y0.data());
      k::avx2::scale(n, -0.3f, y1.data());
      check_close(y1, y0, 1e-6, 1e-6);

      const float d0 = k::scalar::dot<float>(n, x.data(), y0.data());
      const float d1 = k::avx2::dot(n, x.data(), y0.data());
      CHECK(std::abs(d0 - d1) <= 1e-4f * (1.0f + std::abs(d0)));

      auto s0 = randv(n, rng, 4.0f);
      auto s1 = s0;
      k::scalar::softmax<float>(n, s0.data());
      k::avx2::softmax(n, s1.data());
      check_close(s1, s0, 1e-5, 1e-7);

      auto dp = randv(n, rng);
      std::vector<float> g0(n), g1(n);
      k::scalar::softmax_backward<float>(n, s0.data(), dp.data(), g0.data());
      k::avx2::softmax_backward(n, s0.data(), dp.data(), g1.data());
      // dp - <p, dp> cancels; the absolute error follows float rounding of the dot.
      check_close(g1, g0, 1e-5, 1e-5);

      auto gx = randv(n, rng, 3.0f);
      std::vector<float> o0(n), o1(n);
      k::scalar::gelu<float>(n, gx.data(), o0.data());
      k::avx2::gelu(n, gx.data(), o1.data());
      check_close(o1, o0, 1e-5, 1e-6);
      k::scalar::gelu_backward<float>(n, gx.data(), dp.data(), o0.data());
      k::avx2::gelu_backward(n, gx.data(), dp.data(), o1.data());
      // Both sides lose precision in 1 - tanh^2 for large |x|.
      check_close(o1, o0, 1e-5, 1e-5);

      std::vector<float> e0(n), e1(n);
      for (std::size_t i = 0; i < n; ++i) e0[i] = std::exp(gx[i]);
      k::avx2::exp(n, gx.data(), e1.data());
      check_close(e1, e0, 2e-6, 0);
    }
  }

  SUBCASE("row kernels") {
    for (int cols : {1, 5, 8, 128, 131}) {
      const int rows = 9;
      const std::size_t n = static_cast<std::size_t>(rows) * cols;
      auto x = randv(n, rng, 2.0f), gamma = randv(cols, rng), beta = randv(cols, rng);
      std::vector<float> y0(n), y1(n), m0(rows), m1(rows), r0(rows), r1(rows);
      k::scalar::layernorm<float>(rows, cols, x.data(), gamma.data(), beta.data(),
                                  1e-5f, y0.data(), m0.data(), r0.data());
      k::avx2::layernorm(rows, cols, x.data(), gamma.data(), beta.data(), 1e-5f,
                         y1.data(), m1.data(), r1.data());
      check_close(y1, y0, 1e-4, 1e-4);
      check_close(m1, m0, 1e-5, 1e-5);
      check_close(r1, r0, 1e-4, 1e-5);

      auto dy = randv(n, rng);
      std::vector<float> dx0(n), dx1(n), dg0(cols, 0.5f), dg1(cols, 0.5f),
          db0(cols, 0.0f), db1(cols, 0.0f);
      k::scalar::layernorm_backward<float>(rows, cols, x.data(), gamma.data(),
                                           m0.data(), r0.data(), dy.data(),
                                           dx0.data(), dg0.data(), db0.data());
      k::avx2::layernorm_backward(rows, cols, x.data(), gamma.data(), m0.data(),
                                  r0.data(), dy.data(), dx1.data(), dg1.data(),
                                  db1.data());
      check_close(dx1, dx0, 1e-4, 1e-4);
      check_close(dg1, dg0, 1e-4, 1e-4);
      check_close(db1, db0, 1e-4, 1e-4);

      auto b0 = y0, b1 = y0;
      k::scalar::add_row_bias<float>(rows, cols, beta.data(), b0.data(), cols);
      k::avx2::add_row_bias(rows, cols, beta.data(), b1.data(), cols);
      check_close(b1, b0, 1e-6, 1e-6);

      std::vector<float> cs0(cols, 1.0f), cs1(cols, 1.0f);
      k::scalar::column_sum<float>(rows, cols, x.data(), cols, cs0.data());
      k::avx2::column_sum(rows, cols, x.data(), cols, cs1.data());
      check_close(cs1, cs0, 1e-5, 1e-5);
    }
  }

  SUBCASE("adam step") {
    const std::size_t n = 37;
    auto p0 = randv(n, rng), g = randv(n, rng), m0 = randv(n, rng, 0.1f);
    std::vector<float> v0(n);
    for (auto& v : v0) v = std::abs(randv(1, rng)[0]) * 0.01f;
    auto p1 = p0, m1 = m0, v1 = v0;
    k::scalar::adam_step<float>(n, p0.data(), g.data(), m0.data(), v0.data(),
                                1e-3f, 0.9f, 0.999f, 1e-8f, 0.19f, 0.002f);
    k::avx2::adam_step(n, p1.data(), g.data(), m1.data(), v1.data(), 1e-3f, 0.9f,
                       0.999f, 1e-8f, 0.19f, 0.002f);
    check_close(p1, p0, 1e-6, 1e-7);
    check_close(m1, m0, 1e-6, 1e-7);
    check_close(v1, v0, 1e-6, 1e-9);
  }
}

#endif
