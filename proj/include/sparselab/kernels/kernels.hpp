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

#include <cstddef>
#include <string_view>

namespace sparselab::kernels {

// Data-parallel inner loops used by the autodiff ops and the optimizer.
//
// Every variant keeps the per-output-element accumulation order of the scalar
// reference (SIMD lanes run across independent outputs, never across a
// reduction) and uses separate multiply and add, so all variants produce
// bit-identical results. The equivalence tests depend on this.

struct SgdArgs {
  std::size_t n = 0;
  float* weights = nullptr;
  const float* grads = nullptr;
  float* momentum = nullptr;
  const float* mask = nullptr;  // optional; 0.0 marks a pruned entry
  float lr = 0.0f;
  float beta = 0.0f;
  float decay = 0.0f;
};

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;
  /// C[m,n] += A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
                  float* c);
  /// C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
                  float* c);
  /// x[r,:] += v for every row r
  void (*add_row_vector)(std::size_t rows, std::size_t cols, const float* v, float* x);
  /// out[j] += sum_r x[r,j], summed in row order
  void (*accumulate_column_sums)(std::size_t rows, std::size_t cols, const float* x, float* out);
  void (*relu_forward)(std::size_t n, const float* x, float* y);
  /// dx += (x > 0 ? dy : 0)
  void (*relu_backward)(std::size_t n, const float* x, const float* dy, float* dx);
  /// Masked SGD with momentum and coupled L2 decay.
  void (*sgd_update)(const SgdArgs& args);
};

const KernelTable& scalar_kernels();
/// nullptr if the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels();
/// Selected once per process. `SPARSELAB_KERNELS=scalar|avx2` overrides the
/// automatic choice.
const KernelTable& active_kernels();

}  // namespace sparselab::kernels
