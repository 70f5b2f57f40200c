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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparselab/core/model.hpp"
#include "sparselab/optim/sgd.hpp"
#include "sparselab/sparsify/masks.hpp"
#include "sparselab/sparsify/schedules.hpp"

namespace sparselab::runner {

using Json = nlohmann::ordered_json;

enum class DatasetKind { kIdx, kBlobs, kSequences };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kBlobs;
  // idx-images
  std::string train_images, train_labels, val_images, val_labels;
  double mean = 0.0;
  double stddev = 1.0;
  /// Caps on examples taken from each split (0 = all).
  std::size_t train_limit = 0, val_limit = 0;
  // synthetic generators
  std::size_t train_size = 2000, val_size = 500;
  std::uint64_t data_seed = 0;
  std::size_t classes = 10;
  std::size_t dim = 784;
  std::size_t clusters_per_class = 1;
  double separation = 4.0;
  double noise = 1.0;
  double label_noise = 0.0;
  std::string rule = "majority";
  std::size_t vocab = 16;
  std::size_t length = 16;
  std::size_t threshold = 4;
  /// Optional relabeling seed: labels pass through a fixed seeded permutation.
  std::optional<std::uint64_t> label_permutation;
};

enum class Method { kDense, kGmp, kRigl, kAcdc, kOneshot };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct OptimizerConfig {
  optim::LrKind schedule = optim::LrKind::kLinearWarmupLinearDecay;
  double peak_lr = 0.5;
  double warmup_epochs = 2.0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double label_smoothing = 0.1;
};

/// Anchors in base (1x) epochs; the multiplier scales them.
struct AcdcConfig {
  std::optional<double> warmup_epochs;  // default 10% of base epochs
  double phase_len = 5;
  double last_decompression = 15;
  double last_compression = 10;
  double decompression_sparsity = 0.0;
  double sparse_fraction = 0.5;
  bool progressive = false;
  double progressive_start = 0.9;
  std::optional<double> progressive_end_epoch;  // default: start of the last compression
};

struct GmpConfig {
  double ramp_start = 0.0;
  std::optional<double> ramp_end;  // default 75% of base epochs
  std::size_t update_every = 5;
};

struct RiglConfig {
  double alpha = 0.3;
  std::optional<double> t_end;  // default 75% of base epochs
  std::size_t delta_t = 1;
};

struct CheckpointConfig {
  std::size_t every = 10;
  /// "cadence" or "acdc-phases"
  std::string align = "cadence";
  bool enabled = true;
};

struct DiagnosticsConfig {
  bool train_metrics = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  nn::ModelSpec model;
  DatasetSpec dataset;
  Method method = Method::kDense;
  sparsify::DistributionKind distribution = sparsify::DistributionKind::kGlobal;
  std::vector<std::string> keep_dense;
  double target_sparsity = 0.9;
  std::size_t epochs = 10;
  double multiplier = 1.0;
  std::size_t batch_size = 128;
  std::size_t eval_batch_size = 1000;
  OptimizerConfig optimizer;
  AcdcConfig acdc;
  GmpConfig gmp;
  RiglConfig rigl;
  std::optional<double> oneshot_epoch;  // default half of base epochs
  CheckpointConfig checkpoint;
  DiagnosticsConfig diagnostics;
  bool verbose = false;

  std::size_t total_epochs() const;
  sparsify::SparsityDistribution distribution_at(double target) const;
};

/// Scales a base-epoch anchor by the multiplier, rounding to the nearest epoch.
std::size_t scaled_epoch(double base_epochs, double multiplier);

/// Parses a config tree; missing keys take defaults, unknown keys and invalid
/// values raise ConfigError.
ExperimentConfig parse_experiment(const Json& j);
/// Full tree with every default written out.
Json to_json(const ExperimentConfig& cfg);

nn::ModelSpec parse_model(const Json& j);
Json to_json(const nn::ModelSpec& spec);
DatasetSpec parse_dataset(const Json& j);
Json to_json(const DatasetSpec& spec);

/// Resolved schedules of a config.
sparsify::AcdcSchedule acdc_schedule(const ExperimentConfig& cfg);
sparsify::GmpSchedule gmp_schedule(const ExperimentConfig& cfg);
sparsify::RiglSchedule rigl_schedule(const ExperimentConfig& cfg);

Json read_json_file(const std::string& path);
/// Writes to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace sparselab::runner
