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

#include "sparselab/kernels/kernels.hpp"
#include "sparselab/kernels/scalar.hpp"

namespace sparselab::kernels {

namespace {

void sgd_update_scalar(const SgdArgs& a) {
  scalar::sgd_update(a.n, a.weights, a.grads, a.momentum, a.mask, a.lr, a.beta, a.decay);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Isa::kScalar,
      "scalar",
      &scalar::gemm_nn<float>,
      &scalar::gemm_tn<float>,
      &scalar::add_row_vector<float>,
      &scalar::accumulate_column_sums<float>,
      &scalar::relu_forward<float>,
      &scalar::relu_backward<float>,
      &sgd_update_scalar,
  };
  return table;
}

}  // namespace sparselab::kernels
