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
#include <span>
#include <string>
#include <vector>

#include "sparselab/core/model.hpp"

namespace sparselab::optim {

enum class LrKind { kLinearWarmupLinearDecay, kCosine, kConstant };

std::string lr_kind_name(LrKind kind);
LrKind parse_lr_kind(const std::string& name);

/// Step-granular learning-rate schedule. The decaying kinds ramp linearly
/// from 0 to `peak` over [0, warmup_end] and then decay to 0 at total_steps.
struct LrSchedule {
  LrKind kind = LrKind::kLinearWarmupLinearDecay;
  double peak = 0.5;
  std::size_t warmup_end = 0;
  std::size_t total_steps = 1;
};

double lr_at(const LrSchedule& schedule, std::size_t step);

struct SgdHyper {
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// Momentum buffers aligned with a ParamStore.
struct SgdState {
  SgdHyper hyper;
  LrSchedule schedule;
  std::vector<Tensor> momentum;
};

SgdState make_sgd_state(const nn::ParamStore& params, SgdHyper hyper, LrSchedule schedule);

/// One update at the scheduled learning rate for `step`:
///   g' = g + decay * w;  m = beta * m + g';  w = w - lr * m
/// Masked entries are pinned to w = 0, m = 0 without decay; frozen parameters
/// (trainable == false) are left untouched. Throws on a non-finite result.
void sgd_step(nn::ParamStore& params, std::span<const Tensor> grads, SgdState& state, std::size_t step);
void sgd_step_lr(nn::ParamStore& params, std::span<const Tensor> grads, SgdState& state, double lr);

/// Flat indices whose mask bit flipped, per parameter (store order).
struct MaskChange {
  std::vector<std::vector<std::size_t>> per_param;
  std::size_t total() const;
};

/// Entries that differ between two mask snapshots. A missing mask counts as
/// all ones.
MaskChange diff_masks(const std::vector<std::optional<Tensor>>& before,
                      const std::vector<std::optional<Tensor>>& after);
std::vector<std::optional<Tensor>> snapshot_masks(const nn::ParamStore& params);

/// Zeroes the momentum of every changed (newly pruned or regrown) entry.
void reset_momentum(SgdState& state, const MaskChange& changed);

}  // namespace sparselab::optim
