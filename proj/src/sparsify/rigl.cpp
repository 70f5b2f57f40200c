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

#include "sparselab/sparsify/rigl.hpp"

#include <cmath>

#include "sparselab/core/error.hpp"
#include "sparselab/sparsify/masks.hpp"

namespace sparselab::sparsify {

RiglUpdate rigl_step(const Tensor& weights, const Tensor& grads, const Tensor& mask, double fraction) {
  require(fraction >= 0.0 && fraction <= 1.0, "rigl: fraction must lie in [0, 1]");
  require(weights.shape() == mask.shape() && grads.shape() == mask.shape(), "rigl: shape mismatch");
  std::vector<std::size_t> active, inactive;
  for (std::size_t j = 0; j < mask.numel(); ++j) (mask[j] != 0.0f ? active : inactive).push_back(j);

  RiglUpdate out;
  out.mask = mask;
  auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(active.size())));
  if (k > inactive.size()) {
    k = inactive.size();
    out.capped = true;
  }
  if (k == 0) return out;

  // Smallest |w| first: negate the score so top_k picks them, ties to lower index.
  std::vector<double> drop_scores(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) drop_scores[a] = -std::abs(static_cast<double>(weights[active[a]]));
  std::vector<double> grow_scores(inactive.size());
  for (std::size_t a = 0; a < inactive.size(); ++a) grow_scores[a] = std::abs(static_cast<double>(grads[inactive[a]]));

  for (std::size_t a : top_k(drop_scores, k)) {
    out.dropped.push_back(active[a]);
    out.mask[active[a]] = 0.0f;
  }
  for (std::size_t a : top_k(grow_scores, k)) {
    out.grown.push_back(inactive[a]);
    out.mask[inactive[a]] = 1.0f;
  }
  return out;
}

}  // namespace sparselab::sparsify
