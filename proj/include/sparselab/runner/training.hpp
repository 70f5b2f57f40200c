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
#include <functional>
#include <string>
#include <vector>

#include "sparselab/core/model.hpp"
#include "sparselab/diagnostics/metrics.hpp"
#include "sparselab/optim/sgd.hpp"
#include "sparselab/runner/data.hpp"

namespace sparselab::runner {

/// Learning rate for the i-th step of an epoch.
using StepLr = std::function<double(std::size_t step_in_epoch)>;

struct EpochArgs {
  std::size_t batch_size = 128;
  nn::LossConfig loss;
  Rng* shuffle_rng = nullptr;
  Rng* dropout_rng = nullptr;
};

std::size_t steps_per_epoch(std::size_t examples, std::size_t batch_size);

/// One pass over `data` in a shuffled order (the last batch may be short).
/// Returns the mean minibatch loss.
double train_epoch(nn::Model& model, optim::SgdState& state, const Dataset& data, const EpochArgs& args,
                   const StepLr& lr);

/// Logit statistics of the model over a whole split, without smoothing.
diag::LogitSummary evaluate(const nn::Model& model, const Dataset& data, std::size_t batch_size);

/// Fixed CSV layout of metric rows; 9 significant digits, empty cells for
/// absent optionals.
inline constexpr const char* kMetricsHeader =
    "epoch,split,top1,mean_entropy,mean_ce,uncertainty_fraction,train_loss,sparsity,channel_sparsity_avg,"
    "flops_proportion";
std::string format_number(double v);
std::string metrics_csv(const std::vector<diag::MetricRow>& rows);

}  // namespace sparselab::runner
