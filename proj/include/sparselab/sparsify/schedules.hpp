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
#include <optional>
#include <string>
#include <vector>

namespace sparselab::sparsify {

/// Cubic gradual magnitude pruning. Sparsity only changes on epochs that are
/// multiples of update_every, and holds at final_sparsity from ramp_end on.
struct GmpSchedule {
  double final_sparsity = 0.9;
  double ramp_start = 0.0;
  double ramp_end = 75.0;
  std::size_t update_every = 5;
  double total = 100.0;

  /// ramp [0, 0.75 T], updates every 5 epochs, fixed mask over the last quarter.
  static GmpSchedule standard(double total_epochs, double final_sparsity);
};

double gmp_sparsity_at(const GmpSchedule& schedule, double t_epoch);

/// Fraction of layer connections updated at time t:
/// (alpha / 2) (1 + cos(pi t / t_end)) (1 - layer_sparsity).
double rigl_fraction(double t, double alpha, double t_end, double layer_sparsity);

struct RiglSchedule {
  double alpha = 0.3;
  /// Mask updates stop at t_end (75% of training by default).
  double t_end = 75.0;
  /// Update period in epochs.
  std::size_t delta_t = 1;

  static RiglSchedule standard(double total_epochs);
};

enum class PhaseKind { kDenseWarmup, kCompressed, kDecompressed };

std::string phase_name(PhaseKind kind);

struct Phase {
  PhaseKind kind;
  std::size_t start;
  std::size_t length;
  std::size_t end() const { return start + length; }
  friend bool operator==(const Phase&, const Phase&) = default;
};

/// Linear ramp of the compressed-phase target from `start_sparsity` to the
/// final target over [start_epoch, end_epoch].
struct ProgressiveRamp {
  double start_sparsity = 0.9;
  std::size_t start_epoch = 0;
  std::size_t end_epoch = 0;
};

struct AcdcSchedule {
  std::size_t total_epochs = 100;
  std::size_t warmup = 10;
  std::size_t phase_len = 5;
  std::size_t last_decompression = 15;
  std::size_t last_compression = 10;
  double target = 0.9;
  double decompression_sparsity = 0.0;
  /// Share of each compressed+decompressed cycle spent compressed.
  double sparse_fraction = 0.5;
  std::optional<ProgressiveRamp> ramp;

  /// Warmup = 10% of total, 5-epoch phases, 15/10 terminal phases.
  static AcdcSchedule standard(std::size_t total_epochs, double target);
};

/// Phase list covering [0, total_epochs): dense warmup, alternating
/// compressed/decompressed phases (first compressed phase absorbs any
/// remainder), the last decompression and the final compression.
std::vector<Phase> acdc_phases(const AcdcSchedule& schedule);

/// Compressed-phase target at epoch t under a progressive ramp ending at `final_target`.
double progressive_target(double t_epoch, const ProgressiveRamp& ramp, double final_target);

}  // namespace sparselab::sparsify
