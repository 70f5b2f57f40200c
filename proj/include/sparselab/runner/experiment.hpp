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

#include <string>
#include <vector>

#include "sparselab/core/model.hpp"
#include "sparselab/diagnostics/metrics.hpp"
#include "sparselab/runner/config.hpp"

namespace sparselab::runner {

struct RunResult {
  std::vector<diag::MetricRow> rows;
  /// Paths of the cadence/phase checkpoints, in epoch order (final.splb excluded).
  std::vector<std::string> checkpoints;
  nn::Model model;
};

/// Epochs (0-based) after which a checkpoint is written.
std::vector<std::size_t> checkpoint_epochs(const ExperimentConfig& cfg);

/// Trains the configured method end to end. With a non-empty `out_dir`, writes
/// config.resolved.json, metrics.csv (rewritten after every epoch),
/// ckpt_eNNNNN.splb files and final.splb.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace sparselab::runner
