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

#include <algorithm>
#include <cmath>
#include <set>

#include "sparselab/core/error.hpp"
#include "sparselab/core/loss.hpp"
#include "sparselab/core/rng.hpp"
#include "sparselab/core/tensor.hpp"

namespace sparselab {
namespace {

TEST(Tensor, ShapeAndDataAgree) {
  Tensor t({2, 3}, 1.5f);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(shape_str(t.shape()), "(2, 3)");
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), Error);
  EXPECT_THROW((void)t.reshaped({4, 2}), Error);
  const Tensor r = t.reshaped({3, 2});
  EXPECT_TRUE(bit_identical(r.reshaped({2, 3}), t));
}

TEST(Tensor, FiniteCheckAndCast) {
  Tensor t({3}, std::vector<float>{1.0f, 2.0f, 3.0f});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
  const TensorD d = Tensor({2}, std::vector<float>{0.25f, -1.0f}).cast<double>();
  EXPECT_EQ(d[0], 0.25);
  EXPECT_EQ(d[1], -1.0);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SubstreamsAreDistinct) {
  Rng init = Rng::substream(7, Stream::kInit);
  Rng data = Rng::substream(7, Stream::kData);
  EXPECT_NE(init.next_u64(), data.next_u64());
}

TEST(Rng, UniformAndBelowStayInRange) {
  Rng r(5);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ASSERT_LT(r.below(7), 7u);
  }
  EXPECT_NEAR(sum / 20000.0, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  Rng r(9);
  double s = 0.0, s2 = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
}

TEST(Rng, PermutationIsBijection) {
  Rng r(3);
  auto p = r.permutation(100);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(Loss, CrossEntropyMatchesClosedForm) {
  const std::vector<float> z{1.0f, 0.0f};
  // -log(e / (e + 1))
  EXPECT_NEAR(nn::loss_ce(z, 0), std::log1p(std::exp(-1.0)), 1e-12);
  // Smoothed target (0.95, 0.05) with eps = 0.1.
  const double lse = std::log(std::exp(1.0) + 1.0);
  EXPECT_NEAR(nn::loss_ce(z, 0, 0.1), 0.95 * (lse - 1.0) + 0.05 * lse, 1e-12);
  EXPECT_THROW(nn::loss_ce(z, 2), Error);
  const std::vector<float> bad{1.0f, std::nanf("")};
  EXPECT_THROW(nn::loss_ce(bad, 0), Error);
}

TEST(Loss, StableForLargeLogits) {
  const std::vector<float> z{1000.0f, 0.0f, 0.0f};
  EXPECT_NEAR(nn::loss_ce(z, 0), 0.0, 1e-12);
  EXPECT_NEAR(nn::loss_ce(z, 1), 1000.0, 1e-9);
}

}  // namespace
}  // namespace sparselab
