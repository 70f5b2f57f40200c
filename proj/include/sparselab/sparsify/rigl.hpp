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
#include <vector>

#include "sparselab/core/tensor.hpp"

namespace sparselab::sparsify {

struct RiglUpdate {
  Tensor mask;
  std::vector<std::size_t> dropped;
  std::vector<std::size_t> grown;
  /// The requested update count exceeded the inactive entries and was capped.
  bool capped = false;
};

/// Drop-and-grow on one layer: k = round(fraction * active) active entries with
/// the smallest |w| leave the mask and the k currently inactive entries with the
/// largest |grad| enter it. Ties go to the lower flat index on both sides. The
/// caller zeroes the regrown weights.
RiglUpdate rigl_step(const Tensor& weights, const Tensor& grads, const Tensor& mask, double fraction);

}  // namespace sparselab::sparsify
