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
#include "sparselab/sparsify/schedules.hpp"

namespace sparselab::sparsify {

enum class DistributionKind { kUniform, kGlobal, kErk, kBlock4Global };

std::string distribution_name(DistributionKind kind);
DistributionKind parse_distribution(const std::string& name);

/// How a global sparsity target is spread over prunable layers. Layers named in
/// keep_dense (or the aliases "@first" / "@last" for the first and last
/// prunable layer) receive all-ones masks and are excluded from the budget.
struct SparsityDistribution {
  DistributionKind kind = DistributionKind::kGlobal;
  double target = 0.9;
  std::vector<std::string> keep_dense;
};

/// One prunable weight tensor offered to magnitude_mask.
struct LayerWeights {
  std::string name;
  const Tensor* weights = nullptr;
  /// When set, only entries with eligible[j] != 0 may be kept (nested pruning).
  const Tensor* eligible = nullptr;
};

/// Indices of the k largest scores; equal scores prefer the lower index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

/// Keeps the top-(1-s) fraction of weights by |w| per scoring pool: the
/// concatenation of all non-exempt layers for kGlobal, each layer for
/// kUniform, each layer at its ERK density for kErk, and contiguous row-major
/// groups of 4 scored by L1 norm (pooled globally) for kBlock4Global. Kept count
/// is floor(density * pool size). Throws on layer collapse.
std::vector<Tensor> magnitude_mask(std::span<const LayerWeights> layers, const SparsityDistribution& dist);

/// ERK densities d_l proportional to sum(dims)/prod(dims), scaled so that
/// sum d_l n_l = (1 - s) sum n_l, clipping at 1 and re-solving.
std::vector<double> erk_densities(std::span<const Shape> shapes, double global_sparsity);

/// True if `name` is exempt under dist.keep_dense given the ordered list of
/// prunable layer names.
bool is_exempt(const SparsityDistribution& dist, const std::vector<std::string>& prunable_names,
               std::size_t index);

/// Indices (store order) of prunable parameters.
std::vector<std::size_t> prunable_indices(const nn::ParamStore& params);

/// Computes masks over the prunable parameters of `params` and installs them
/// (zeroing removed weights). With `nested`, the existing masks restrict which
/// entries can survive.
void apply_magnitude_masks(nn::ParamStore& params, const SparsityDistribution& dist, bool nested = false);

/// Installs all-ones masks on every prunable parameter.
void apply_dense_masks(nn::ParamStore& params);

/// Mask update at an AC/DC phase boundary. Compression recomputes masks at
/// `target` from current magnitudes; decompression installs masks at
/// `decompression_sparsity` (all ones when 0). Dense warmup leaves masks absent.
void acdc_apply(PhaseKind kind, nn::ParamStore& params, const SparsityDistribution& dist, double target,
                double decompression_sparsity);

/// Fraction of zero mask entries over the non-exempt prunable parameters.
double masked_sparsity(const nn::ParamStore& params, const SparsityDistribution& dist);

/// Fraction of exactly-zero weights over all prunable parameters.
double zero_fraction(const nn::ParamStore& params);

}  // namespace sparselab::sparsify
