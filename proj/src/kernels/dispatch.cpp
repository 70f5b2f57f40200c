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

#include <cstdlib>
#include <string_view>

#include "sparselab/core/error.hpp"
#include "sparselab/kernels/kernels.hpp"

namespace sparselab::kernels {

const KernelTable* avx2_kernels_compiled();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& select() {
  const char* env = std::getenv("SPARSELAB_KERNELS");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return scalar_kernels();
  const KernelTable* avx2 = avx2_kernels();
  if (want == "avx2") {
    if (!avx2) throw Error("SPARSELAB_KERNELS=avx2 requested but AVX2 is unavailable");
    return *avx2;
  }
  if (want != "auto") throw Error("unknown SPARSELAB_KERNELS value: " + std::string(want));
  return avx2 ? *avx2 : scalar_kernels();
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable* table = cpu_has_avx2() ? avx2_kernels_compiled() : nullptr;
  return table;
}

const KernelTable& active_kernels() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace sparselab::kernels
