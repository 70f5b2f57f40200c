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

#include <span>

namespace sparselab::nn {

/// Cross-entropy of one logit vector at f64. eps = 0 gives -log softmax(z)[label];
/// eps > 0 uses the target (1-eps)*onehot(label) + eps/C.
double loss_ce(std::span<const float> logits, int label, double eps = 0.0);

}  // namespace sparselab::nn
