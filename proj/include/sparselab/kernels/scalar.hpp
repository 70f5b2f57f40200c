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

#pragma once

// Scalar reference kernels. Templated so the double-precision instantiation of
// the autodiff core (used by gradient checks and Hessian oracles) shares them.

#include <cstddef>

namespace sparselab::kernels::scalar {

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[p * m + i];
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void add_row_vector(std::size_t rows, std::size_t cols, const T* v, T* x) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) x[r * cols + j] += v[j];
}

template <class T>
void accumulate_column_sums(std::size_t rows, std::size_t cols, const T* x, T* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[j] += x[r * cols + j];
}

template <class T>
void relu_forward(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
}

template <class T>
void relu_backward(std::size_t n, const T* x, const T* dy, T* dx) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > T{0} ? dy[i] : T{0};
}

template <class T>
void sgd_update(std::size_t n, T* w, const T* g, T* m, const T* mask, T lr, T beta, T decay) {
  for (std::size_t i = 0; i < n; ++i) {
    if (mask && mask[i] == T{0}) {
      w[i] = T{0};
      m[i] = T{0};
      continue;
    }
    const T g2 = g[i] + decay * w[i];
    m[i] = beta * m[i] + g2;
    w[i] = w[i] - lr * m[i];
  }
}

}  // namespace sparselab::kernels::scalar
