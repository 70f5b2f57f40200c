// Copyright 2026 The SparseLab Authors. All Rights Reserved.
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
// =============================================================================

#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "sparselab/core/rng.hpp"
#include "sparselab/kernels/kernels.hpp"

namespace sparselab::kernels {
namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return v;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    simd_ = avx2_kernels();
    if (simd_ == nullptr) GTEST_SKIP() << "AVX2 kernels unavailable on this machine";
  }
  const KernelTable& ref_ = scalar_kernels();
  const KernelTable* simd_ = nullptr;
};

// Odd sizes exercise every register-block tail.
const std::size_t kSizes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 16, 8}, {5, 17, 9}, {13, 31, 29}, {64, 40, 33}, {2, 100, 3}};

TEST_F(KernelEquivalence, GemmNnBitIdentical) {
  Rng rng(11);
  for (const auto& s : kSizes) {
    const auto [m, n, k] = std::tuple(s[0], s[1], s[2]);
    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng), c0 = random_vec(m * n, rng);
    auto c1 = c0, c2 = c0;
    ref_.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
    simd_->gemm_nn(m, n, k, a.data(), b.data(), c2.data());
    EXPECT_TRUE(same_bits(c1, c2)) << m << "x" << n << "x" << k;
  }
}

TEST_F(KernelEquivalence, GemmTnBitIdentical) {
  Rng rng(12);
  for (const auto& s : kSizes) {
    const auto [m, n, k] = std::tuple(s[0], s[1], s[2]);
    const auto a = random_vec(k * m, rng), b = random_vec(k * n, rng), c0 = random_vec(m * n, rng);
    auto c1 = c0, c2 = c0;
    ref_.gemm_tn(m, n, k, a.data(), b.data(), c1.data());
    simd_->gemm_tn(m, n, k, a.data(), b.data(), c2.data());
    EXPECT_TRUE(same_bits(c1, c2)) << m << "x" << n << "x" << k;
  }
}

TEST_F(KernelEquivalence, ElementwiseBitIdentical) {
  Rng rng(13);
  for (std::size_t n : {1u, 7u, 8u, 9u, 33u, 1000u}) {
    const auto x = random_vec(n, rng), dy = random_vec(n, rng), dx0 = random_vec(n, rng);
    std::vector<float> y1(n), y2(n);
    ref_.relu_forward(n, x.data(), y1.data());
    simd_->relu_forward(n, x.data(), y2.data());
    EXPECT_TRUE(same_bits(y1, y2));
    auto dx1 = dx0, dx2 = dx0;
    ref_.relu_backward(n, x.data(), dy.data(), dx1.data());
    simd_->relu_backward(n, x.data(), dy.data(), dx2.data());
    EXPECT_TRUE(same_bits(dx1, dx2));

    const std::size_t rows = 3;
    const auto v = random_vec(n, rng), m0 = random_vec(rows * n, rng);
    auto m1 = m0, m2 = m0;
    ref_.add_row_vector(rows, n, v.data(), m1.data());
    simd_->add_row_vector(rows, n, v.data(), m2.data());
    EXPECT_TRUE(same_bits(m1, m2));
    std::vector<float> s1(n, 0.5f), s2(n, 0.5f);
    ref_.accumulate_column_sums(rows, n, m0.data(), s1.data());
    simd_->accumulate_column_sums(rows, n, m0.data(), s2.data());
    EXPECT_TRUE(same_bits(s1, s2));
  }
}

TEST_F(KernelEquivalence, SgdBitIdentical) {
  Rng rng(14);
  for (std::size_t n : {1u, 8u, 15u, 257u}) {
    const auto w0 = random_vec(n, rng), g = random_vec(n, rng), m0 = random_vec(n, rng);
    std::vector<float> mask(n);
    for (float& v : mask) v = rng.uniform() < 0.3 ? 0.0f : 1.0f;
    for (const float* mk : {static_cast<const float*>(nullptr), static_cast<const float*>(mask.data())}) {
      auto w1 = w0, w2 = w0, v1 = m0, v2 = m0;
      ref_.sgd_update({n, w1.data(), g.data(), v1.data(), mk, 0.1f, 0.9f, 1e-4f});
      simd_->sgd_update({n, w2.data(), g.data(), v2.data(), mk, 0.1f, 0.9f, 1e-4f});
      EXPECT_TRUE(same_bits(w1, w2));
      EXPECT_TRUE(same_bits(v1, v2));
    }
  }
}

TEST(ScalarKernels, GemmMatchesDoubleOracle) {
  Rng rng(21);
  const std::size_t m = 7, n = 5, k = 9;
  const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
  std::vector<float> c(m * n, 0.0f);
  scalar_kernels().gemm_nn(m, n, k, a.data(), b.data(), c.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double ref = 0.0;
      for (std::size_t p = 0; p < k; ++p) ref += static_cast<double>(a[i * k + p]) * b[p * n + j];
      EXPECT_NEAR(c[i * n + j], ref, 1e-5);
    }
  std::vector<float> ct(m * n, 0.0f);
  std::vector<float> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  scalar_kernels().gemm_tn(m, n, k, at.data(), b.data(), ct.data());
  for (std::size_t i = 0; i < m * n; ++i) EXPECT_NEAR(ct[i], c[i], 1e-5);
}

TEST(ScalarKernels, SgdUpdateFollowsRecurrence) {
  std::vector<float> w{1.0f, -2.0f, 3.0f}, g{0.5f, 0.5f, 0.5f}, m{0.1f, 0.2f, 0.3f};
  const std::vector<float> mask{1.0f, 0.0f, 1.0f};
  scalar_kernels().sgd_update({3, w.data(), g.data(), m.data(), mask.data(), 0.1f, 0.9f, 0.01f});
  const float g0 = 0.5f + 0.01f * 1.0f;
  const float m0 = 0.9f * 0.1f + g0;
  EXPECT_EQ(m[0], m0);
  EXPECT_EQ(w[0], 1.0f - 0.1f * m0);
  EXPECT_EQ(w[1], 0.0f);
  EXPECT_EQ(m[1], 0.0f);
}

TEST(Dispatch, ActiveTableIsOneOfTheVariants) {
  const auto& t = active_kernels();
  EXPECT_TRUE(&t == &scalar_kernels() || &t == avx2_kernels());
}

}  // namespace
}  // namespace sparselab::kernels
