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

#include "sparselab/core/tensor.hpp"
#include "sparselab/runner/config.hpp"

namespace sparselab::runner {

/// Examples as rows of `inputs` with integer class labels.
struct Dataset {
  Tensor inputs;
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t width() const { return inputs.rank() == 2 ? inputs.dim(1) : 0; }
  /// Rows `rows` as a contiguous batch.
  Tensor gather(std::span<const std::size_t> rows, std::vector<int>* labels_out) const;
  /// Rows [begin, end).
  Tensor slice(std::size_t begin, std::size_t end) const;
};

struct DataSplits {
  Dataset train;
  Dataset val;
};

/// MNIST-format IDX pair: images (magic 0x00000803) and labels (0x00000801),
/// big-endian dims, u8 pixels scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Materializes both splits of a dataset spec.
DataSplits make_dataset(const DatasetSpec& spec);

/// Gaussian mixture: each class owns `clusters_per_class` centers at distance
/// `separation` from the origin in random directions; samples add isotropic
/// noise. A `label_noise` share of labels is resampled uniformly.
Dataset make_blobs(const DatasetSpec& spec, std::size_t count, std::uint64_t stream_seed);

/// Uniform token strings labeled by a rule:
///   majority         1 if tokens from the upper half of the vocabulary outnumber the lower half (ties 0)
///   first_token_mod  first token mod classes
///   count_threshold  1 if token 0 occurs at least `threshold` times
Dataset make_sequences(const DatasetSpec& spec, std::size_t count, std::uint64_t stream_seed);

/// Applies a seeded permutation to every label.
void permute_labels(Dataset& d, std::uint64_t seed);

}  // namespace sparselab::runner
