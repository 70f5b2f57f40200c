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

// Compiled with -mavx2 (and without -mfma): products and sums stay separately
// rounded so every lane matches the scalar reference bit for bit.

#include "sparselab/kernels/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__)

#include <immintrin.h>

namespace sparselab::kernels {

namespace {

// Element (i, p) of the left operand lives at a[i * rs + p * cs].
template <int R>
inline void block_16(std::size_t n, std::size_t k, const float* a, std::size_t rs, std::size_t cs,
                     const float* b, float* c, std::size_t i, std::size_t j) {
  __m256 acc0[R];
  __m256 acc1[R];
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
    acc0[r] = _mm256_loadu_ps(c + (i + r) * n + j);
    acc1[r] = _mm256_loadu_ps(c + (i + r) * n + j + 8);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * n + j);
    const __m256 b1 = _mm256_loadu_ps(b + p * n + j + 8);
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) {
      const __m256 av = _mm256_set1_ps(a[(i + r) * rs + p * cs]);
      acc0[r] = _mm256_add_ps(acc0[r], _mm256_mul_ps(av, b0));
      acc1[r] = _mm256_add_ps(acc1[r], _mm256_mul_ps(av, b1));
    }
  }
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
    _mm256_storeu_ps(c + (i + r) * n + j, acc0[r]);
    _mm256_storeu_ps(c + (i + r) * n + j + 8, acc1[r]);
  }
}

template <int R>
inline void block_8(std::size_t n, std::size_t k, const float* a, std::size_t rs, std::size_t cs,
                    const float* b, float* c, std::size_t i, std::size_t j) {
  __m256 acc[R];
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) acc[r] = _mm256_loadu_ps(c + (i + r) * n + j);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 bv = _mm256_loadu_ps(b + p * n + j);
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) {
      const __m256 av = _mm256_set1_ps(a[(i + r) * rs + p * cs]);
      acc[r] = _mm256_add_ps(acc[r], _mm256_mul_ps(av, bv));
    }
  }
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) _mm256_storeu_ps(c + (i + r) * n + j, acc[r]);
}

template <int R>
inline void row_block(std::size_t n, std::size_t k, const float* a, std::size_t rs, std::size_t cs,
                      const float* b, float* c, std::size_t i) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) block_16<R>(n, k, a, rs, cs, b, c, i, j);
  for (; j + 8 <= n; j += 8) block_8<R>(n, k, a, rs, cs, b, c, i, j);
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      float acc = c[(i + r) * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[(i + r) * rs + p * cs] * b[p * n + j];
      c[(i + r) * n + j] = acc;
    }
  }
}

void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t rs,
                  std::size_t cs, const float* b, float* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_block<4>(n, k, a, rs, cs, b, c, i);
  for (; i < m; ++i) row_block<1>(n, k, a, rs, cs, b, c, i);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
             float* c) {
  gemm_strided(m, n, k, a, k, 1, b, c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
             float* c) {
  gemm_strided(m, n, k, a, 1, m, b, c);
}

void add_row_vector(std::size_t rows, std::size_t cols, const float* v, float* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = x + r * cols;
    std::size_t j = 0;
    for (; j + 8 <= cols; j += 8)
      _mm256_storeu_ps(row + j, _mm256_add_ps(_mm256_loadu_ps(row + j), _mm256_loadu_ps(v + j)));
    for (; j < cols; ++j) row[j] += v[j];
  }
}

void accumulate_column_sums(std::size_t rows, std::size_t cols, const float* x, float* out) {
  std::size_t j = 0;
  for (; j + 8 <= cols; j += 8) {
    __m256 acc = _mm256_loadu_ps(out + j);
    for (std::size_t r = 0; r < rows; ++r) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + r * cols + j));
    _mm256_storeu_ps(out + j, acc);
  }
  for (; j < cols; ++j) {
    float acc = out[j];
    for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + j];
    out[j] = acc;
  }
}

void relu_forward(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  // max_ps returns the second operand for NaN and for +-0, matching x > 0 ? x : 0.
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::size_t n, const float* x, const float* dy, float* dx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 pass = _mm256_and_ps(pos, _mm256_loadu_ps(dy + i));
    _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), pass));
  }
  for (; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : 0.0f;
}

void sgd_update(const SgdArgs& s) {
  const __m256 lr = _mm256_set1_ps(s.lr);
  const __m256 beta = _mm256_set1_ps(s.beta);
  const __m256 decay = _mm256_set1_ps(s.decay);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= s.n; i += 8) {
    const __m256 w = _mm256_loadu_ps(s.weights + i);
    const __m256 g = _mm256_loadu_ps(s.grads + i);
    const __m256 m = _mm256_loadu_ps(s.momentum + i);
    const __m256 g2 = _mm256_add_ps(g, _mm256_mul_ps(decay, w));
    __m256 m2 = _mm256_add_ps(_mm256_mul_ps(beta, m), g2);
    __m256 w2 = _mm256_sub_ps(w, _mm256_mul_ps(lr, m2));
    if (s.mask) {
      const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(s.mask + i), zero, _CMP_NEQ_UQ);
      m2 = _mm256_and_ps(keep, m2);
      w2 = _mm256_and_ps(keep, w2);
    }
    _mm256_storeu_ps(s.momentum + i, m2);
    _mm256_storeu_ps(s.weights + i, w2);
  }
  for (; i < s.n; ++i) {
    if (s.mask && s.mask[i] == 0.0f) {
      s.weights[i] = 0.0f;
      s.momentum[i] = 0.0f;
      continue;
    }
    const float g2 = s.grads[i] + s.decay * s.weights[i];
    s.momentum[i] = s.beta * s.momentum[i] + g2;
    s.weights[i] = s.weights[i] - s.lr * s.momentum[i];
  }
}

}  // namespace

const KernelTable* avx2_kernels_compiled() {
  static const KernelTable table{
      Isa::kAvx2,   "avx2",     &gemm_nn,   &gemm_tn,     &add_row_vector,
      &accumulate_column_sums, &relu_forward, &relu_backward, &sgd_update,
  };
  return &table;
}

}  // namespace sparselab::kernels

#else

namespace sparselab::kernels {
const KernelTable* avx2_kernels_compiled() { return nullptr; }
}  // namespace sparselab::kernels

#endif
