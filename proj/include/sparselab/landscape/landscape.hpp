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
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sparselab/core/model.hpp"

namespace sparselab::landscape {

/// A differentiable objective over a flat f64 parameter vector.
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;
  virtual std::size_t dim() const = 0;
  /// Returns the loss and writes the full gradient into `grad`.
  virtual double loss_grad(std::span<const double> w, std::span<double> grad) const = 0;
};

/// Mean cross-entropy of a model on one fixed batch, evaluated at f64.
/// Parameters are flattened in store order.
class ModelOracle final : public GradientOracle {
 public:
  ModelOracle(nn::ModelSpec spec, const nn::ParamStore& layout, Tensor batch, std::vector<int> labels);
  std::size_t dim() const override { return dim_; }
  double loss_grad(std::span<const double> w, std::span<double> grad) const override;

 private:
  nn::ModelSpec spec_;
  std::vector<Shape> shapes_;
  std::size_t dim_ = 0;
  TensorD batch_;
  std::vector<int> labels_;
};

std::vector<double> flatten(const nn::ParamStore& params);
/// 1 where a parameter may move (unmasked entries and non-prunable tensors), 0 on masked entries.
std::vector<double> mask_support(const nn::ParamStore& params);

/// Central-difference Hessian-vector product
///   (grad(w + eps v) - grad(w - eps v)) / (2 eps),  eps = 1e-3 (1 + max|w|) / max(1, max|v|),
/// projected onto `support` (empty = no projection).
std::vector<double> hvp(const GradientOracle& oracle, std::span<const double> w, std::span<const double> v,
                        std::span<const double> support = {});

struct SharpnessConfig {
  std::size_t power_iters = 20;
  bool restrict_to_mask = true;
  std::uint64_t seed = 0;
  /// Examples drawn (seeded) for the sharpness batch.
  std::size_t batch_size = 512;
};

struct SharpnessResult {
  double value = 0.0;
  /// Rayleigh quotient of the iterate entering each power step.
  std::vector<double> rayleigh;
  bool degenerate = false;
};

/// Power iteration v <- Hv / |Hv| from a seeded random unit vector on the
/// support; returns the Rayleigh quotient of the final iterate.
SharpnessResult power_iteration(const GradientOracle& oracle, std::span<const double> w,
                                std::span<const double> support, std::size_t iters, std::uint64_t seed,
                                bool flip_start = false);

/// Sharpness of a model on the given examples (a seeded subset of at most
/// cfg.batch_size rows is used).
SharpnessResult sharpness(const nn::Model& model, const Tensor& inputs, std::span<const int> labels,
                          const SharpnessConfig& cfg);

/// Parameter blend (1 - lambda) a + lambda b. lambda 0 and 1 copy the endpoint
/// exactly. Blended points carry no mask unless `apply_masks`, in which case
/// the blend uses effective weights and the union of both endpoint masks.
nn::ParamStore blend(const nn::ParamStore& a, const nn::ParamStore& b, double lambda, bool apply_masks = false);

struct PathRow {
  double alpha = 0.0;
  std::string split;
  double loss = 0.0;
};

using LossEval = std::function<double(const nn::ParamStore&)>;

/// Piecewise-linear path through consecutive checkpoints, `segments` pieces
/// per interval, shared endpoints evaluated once. alpha is the traversed
/// fraction of the whole path. Rows are grouped by point, then split.
std::vector<PathRow> interpolate_path(std::span<const nn::ParamStore> checkpoints, std::size_t segments,
                                      const std::vector<std::pair<std::string, LossEval>>& splits,
                                      bool apply_masks = false);

}  // namespace sparselab::landscape
