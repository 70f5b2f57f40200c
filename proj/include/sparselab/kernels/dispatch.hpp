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

// Type-generic entry points: float goes through the runtime-selected table,
// other scalar types use the scalar reference templates.

#include <type_traits>
#include <vector>

#include "sparselab/kernels/kernels.hpp"
#include "sparselab/kernels/scalar.hpp"

namespace sparselab::kernels {

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  if constexpr (std::is_same_v<T, float>)
    active_kernels().gemm_nn(m, n, k, a, b, c);
  else
    scalar::gemm_nn(m, n, k, a, b, c);
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  if constexpr (std::is_same_v<T, float>)
    active_kernels().gemm_tn(m, n, k, a, b, c);
  else
    scalar::gemm_tn(m, n, k, a, b, c);
}

/// C[m,n] += A[m,k] * B[n,k]^T. B is transposed into scratch first so the
/// accumulation order matches gemm_nn.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(m, n, k, a, bt.data(), c);
}

template <class T>
void add_row_vector(std::size_t rows, std::size_t cols, const T* v, T* x) {
  if constexpr (std::is_same_v<T, float>)
    active_kernels().add_row_vector(rows, cols, v, x);
  else
    scalar::add_row_vector(rows, cols, v, x);
}

template <class T>
void accumulate_column_sums(std::size_t rows, std::size_t cols, const T* x, T* out) {
  if constexpr (std::is_same_v<T, float>)
    active_kernels().accumulate_column_sums(rows, cols, x, out);
  else
    scalar::accumulate_column_sums(rows, cols, x, out);
}

template <class T>
void relu_forward(std::size_t n, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>)
    active_kernels().relu_forward(n, x, y);
  else
    scalar::relu_forward(n, x, y);
}

template <class T>
void relu_backward(std::size_t n, const T* x, const T* dy, T* dx) {
  if constexpr (std::is_same_v<T, float>)
    active_kernels().relu_backward(n, x, dy, dx);
  else
    scalar::relu_backward(n, x, dy, dx);
}

}  // namespace sparselab::kernels
