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

#include "sparselab/sparsify/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sparselab/core/error.hpp"

namespace sparselab::sparsify {

GmpSchedule GmpSchedule::standard(double total_epochs, double final_sparsity) {
  GmpSchedule s;
  s.final_sparsity = final_sparsity;
  s.ramp_start = 0.0;
  s.ramp_end = 0.75 * total_epochs;
  s.total = total_epochs;
  return s;
}

double gmp_sparsity_at(const GmpSchedule& s, double t) {
  if (!(s.ramp_end > s.ramp_start)) fail("gmp: ramp end must come after ramp start");
  require(s.update_every > 0, "gmp: update period must be positive");
  require(t >= 0.0 && t <= s.total, "gmp: epoch outside [0, total]");
  if (t >= s.ramp_end) return s.final_sparsity;
  const double every = static_cast<double>(s.update_every);
  const double tq = std::floor(t / every) * every;
  const double x = std::clamp((tq - s.ramp_start) / (s.ramp_end - s.ramp_start), 0.0, 1.0);
  const double r = 1.0 - x;
  return s.final_sparsity * (1.0 - r * r * r);
}

double rigl_fraction(double t, double alpha, double t_end, double layer_sparsity) {
  require(t_end > 0.0, "rigl: T_end must be positive");
  require(t >= 0.0, "rigl: negative time");
  if (t > t_end) fail("rigl: t beyond T_end");
  return alpha / 2.0 * (1.0 + std::cos(std::numbers::pi * t / t_end)) * (1.0 - layer_sparsity);
}

RiglSchedule RiglSchedule::standard(double total_epochs) {
  RiglSchedule s;
  s.t_end = 0.75 * total_epochs;
  return s;
}

std::string phase_name(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::kDenseWarmup: return "dense-warmup";
    case PhaseKind::kCompressed: return "compressed";
    case PhaseKind::kDecompressed: return "decompressed";
  }
  return "?";
}

AcdcSchedule AcdcSchedule::standard(std::size_t total_epochs, double target) {
  AcdcSchedule s;
  s.total_epochs = total_epochs;
  s.warmup = total_epochs / 10;
  s.target = target;
  return s;
}

std::vector<Phase> acdc_phases(const AcdcSchedule& s) {
  require(s.phase_len > 0, "acdc: phase length must be positive");
  require(s.last_compression > 0, "acdc: final compression must be non-empty");
  require(s.sparse_fraction > 0.0 && s.sparse_fraction < 1.0, "acdc: sparse fraction must lie in (0, 1)");
  const std::size_t tail = s.warmup + s.last_decompression + s.last_compression;
  if (s.total_epochs < tail + 2 * s.phase_len) {
    fail("acdc: infeasible total of " + std::to_string(s.total_epochs) + " epochs (need at least " +
         std::to_string(tail + 2 * s.phase_len) + ")");
  }
  const std::size_t cycle = 2 * s.phase_len;
  const auto c_len = static_cast<std::size_t>(
      std::clamp<double>(std::round(static_cast<double>(cycle) * s.sparse_fraction), 1.0, static_cast<double>(cycle - 1)));
  const std::size_t d_len = cycle - c_len;

  const std::size_t middle = s.total_epochs - tail;
  std::vector<std::size_t> lengths;
  std::size_t used = 0;
  for (bool compressed = true;; compressed = !compressed) {
    const std::size_t len = compressed ? c_len : d_len;
    if (used + len > middle) break;
    lengths.push_back(len);
    used += len;
  }
  lengths.front() += middle - used;

  std::vector<Phase> phases;
  std::size_t at = 0;
  if (s.warmup > 0) phases.push_back({PhaseKind::kDenseWarmup, 0, s.warmup});
  at = s.warmup;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    phases.push_back({i % 2 == 0 ? PhaseKind::kCompressed : PhaseKind::kDecompressed, at, lengths[i]});
    at += lengths[i];
  }
  if (s.last_decompression > 0) {
    phases.push_back({PhaseKind::kDecompressed, at, s.last_decompression});
    at += s.last_decompression;
  }
  phases.push_back({PhaseKind::kCompressed, at, s.last_compression});
  return phases;
}

double progressive_target(double t, const ProgressiveRamp& ramp, double final_target) {
  require(ramp.start_sparsity <= final_target, "progressive ramp: start sparsity above final target");
  require(ramp.end_epoch >= ramp.start_epoch, "progressive ramp: window ends before it starts");
  const double a = static_cast<double>(ramp.start_epoch), b = static_cast<double>(ramp.end_epoch);
  if (t <= a) return ramp.start_sparsity;
  if (t >= b) return final_target;
  return ramp.start_sparsity + (final_target - ramp.start_sparsity) * (t - a) / (b - a);
}

}  // namespace sparselab::sparsify
