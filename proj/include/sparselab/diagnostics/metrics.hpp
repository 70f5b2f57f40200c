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
#include <span>
#include <string>
#include <vector>

#include "sparselab/core/model.hpp"

namespace sparselab::diag {

/// Shannon entropy of softmax(z) in nats, evaluated at f64 after a max shift.
double entropy(std::span<const float> logits);

/// Share of binary logits whose sigmoid lies strictly inside (0.1, 0.9).
/// Probabilities are compared at the input (f32) precision, so a logit of
/// ln 9 lands on the 0.9 boundary and counts as certain.
double uncertainty_fraction(std::span<const float> binary_logits);

/// Nonzero pattern of a tensor as a 0/1 tensor.
Tensor support_of(const Tensor& t);

/// |A ∩ B| / |A ∪ B| over the nonzero entries of congruent tensor lists; 1 when
/// both supports are empty.
double mask_iou(std::span<const Tensor> a, std::span<const Tensor> b);

/// Effective prunable weights (w * mask) in store order.
std::vector<Tensor> prunable_weights(const nn::ParamStore& params);

struct ChannelSparsity {
  std::vector<double> per_layer;
  std::size_t zero_channels = 0;
  std::size_t channels = 0;
  /// Pooled zero channels over pooled channels.
  double global() const;
};

/// An output channel is zero when every effective weight in its slice is 0.
ChannelSparsity channel_sparsity(const nn::ParamStore& params);

struct FlopsReport {
  double dense = 0.0;
  /// Density-weighted share of dense FLOPs.
  double proportion = 1.0;
};

/// Inference FLOPs counting multiply and add separately: 2 m n per linear
/// application and 2 o i kH kW per conv output pixel. Layer density comes
/// from its mask (1 when unmasked).
FlopsReport flops(const nn::ParamStore& params);

/// Mean of (err_model - err_base) / err_base over tasks.
double aie(std::span<const double> err_model, std::span<const double> err_base);

/// Per-split summary of a logit matrix.
struct LogitSummary {
  std::size_t count = 0;
  double top1 = 0.0;
  double mean_entropy = 0.0;
  double mean_ce = 0.0;
  /// Present for two-class tasks, using z1 - z0 as the binary logit.
  std::optional<double> uncertainty;
};

/// Accumulates predictions batch by batch.
class LogitAccumulator {
 public:
  void add(const Tensor& logits, std::span<const int> labels);
  LogitSummary summary() const;

 private:
  std::size_t count_ = 0, correct_ = 0, classes_ = 0, uncertain_ = 0;
  double entropy_sum_ = 0.0, ce_sum_ = 0.0;
};

struct MetricRow {
  std::size_t epoch = 0;
  std::string split;
  double top1 = 0.0;
  double mean_entropy = 0.0;
  double mean_ce = 0.0;
  std::optional<double> uncertainty_fraction;
  double train_loss = 0.0;
  double sparsity = 0.0;
  std::optional<double> channel_sparsity_avg;
  double flops_proportion = 1.0;
};

}  // namespace sparselab::diag
