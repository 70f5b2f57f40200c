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

#include "sparselab/core/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparselab/core/error.hpp"

namespace sparselab::nn {

double loss_ce(std::span<const float> logits, int label, double eps) {
  const std::size_t c = logits.size();
  require(c >= 2, "loss_ce needs at least two classes");
  if (label < 0 || static_cast<std::size_t>(label) >= c)
    throw Error("label " + std::to_string(label) + " out of range [0, " + std::to_string(c) + ")");
  require(eps >= 0.0 && eps < 1.0, "label smoothing must be in [0, 1)");
  double mx = logits[0];
  for (float z : logits) {
    require(std::isfinite(z), "non-finite logits");
    mx = std::max(mx, static_cast<double>(z));
  }
  double sum = 0.0;
  for (float z : logits) sum += std::exp(static_cast<double>(z) - mx);
  const double lse = mx + std::log(sum);
  if (eps == 0.0) return lse - static_cast<double>(logits[label]);
  double loss = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    const double q = (j == static_cast<std::size_t>(label) ? 1.0 - eps : 0.0) + eps / static_cast<double>(c);
    loss -= q * (static_cast<double>(logits[j]) - lse);
  }
  return loss;
}

}  // namespace sparselab::nn
