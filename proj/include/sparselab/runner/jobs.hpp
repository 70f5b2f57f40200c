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

#include "sparselab/runner/config.hpp"
#include "sparselab/transfer/transfer.hpp"

namespace sparselab::runner {

enum class TransferRecipe { kGradual, kDenseRecipe, kRescaled };

struct TransferJob {
  std::string checkpoint;
  DatasetSpec task;
  TransferRecipe recipe = TransferRecipe::kGradual;
  transfer::Finetune finetune = transfer::Finetune::kFull;
  std::vector<std::size_t> epochs{1, 2, 3};
  transfer::TransferHyper hyper;
  /// Overrides the transformer's dropout rate when set.
  std::optional<double> dropout;
};

TransferJob parse_transfer_job(const Json& j);
Json to_json(const TransferJob& job);

struct JobOutcome {
  /// Validation top-1 the job is ranked by.
  double score = 0.0;
  std::string csv;
};

/// Loads the checkpoint, attaches a new head, runs the recipe and writes
/// transfer.resolved.json and the per-stage (or per-epoch) CSV under `out_dir`.
JobOutcome run_transfer_job(const TransferJob& job, const std::string& out_dir);

/// Grid over dotted config paths on top of a base train or transfer config:
///   {"base": {...} | "transfer": {...}, "grid": {"optimizer.peak_lr": [..], ...}}
struct SweepSpec {
  Json base;
  bool transfer = false;
  std::vector<std::pair<std::string, std::vector<Json>>> grid;
};

SweepSpec parse_sweep(const Json& j);

/// Cartesian product of the grid in row-major order (last key varies fastest).
std::vector<Json> expand_grid(const SweepSpec& spec);

struct SweepRun {
  std::size_t index = 0;
  Json overrides;
  double score = 0.0;
};

struct SweepSummary {
  std::vector<SweepRun> runs;
  /// Mean score of the two best runs (the single run when only one exists).
  double best_two_mean = 0.0;
};

/// Runs every grid point in its own `out_dir/run_NNN` directory on up to
/// `threads` workers and writes summary.csv and summary.json.
SweepSummary run_sweep(const SweepSpec& spec, const std::string& out_dir, std::size_t threads);

/// Worker count from SPARSELAB_THREADS (default 1).
std::size_t sweep_threads_from_env();

double mean_of_best_two(std::vector<double> scores);

}  // namespace sparselab::runner
