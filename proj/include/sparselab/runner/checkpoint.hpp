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

#include <cstdint>
#include <string>
#include <vector>

#include "sparselab/core/model.hpp"
#include "sparselab/optim/sgd.hpp"
#include "sparselab/runner/config.hpp"

namespace sparselab::runner {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class TensorKind { kWeights, kMask, kMomentum };

std::string tensor_kind_name(TensorKind k);

struct StoredTensor {
  std::string name;
  TensorKind kind = TensorKind::kWeights;
  Tensor value;
};

/// In-memory checkpoint. On disk: "SPLB" | u32 LE version | u64 LE header
/// length | UTF-8 JSON header | little-endian f32 payload.
struct Checkpoint {
  std::vector<StoredTensor> tensors;
  /// epoch, seed, method, schedule state, recorded losses, resolved config.
  Json metadata = Json::object();

  friend bool operator==(const Checkpoint& a, const Checkpoint& b);
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Weights, masks and (optionally) momentum of a model in store order.
Checkpoint capture(const nn::Model& model, const optim::SgdState* state, Json metadata);

/// Rebuilds the model described by the checkpoint's embedded config and loads
/// weights and masks. Momentum is copied into `state` when given.
nn::Model restore_model(const Checkpoint& ckpt, optim::SgdState* state = nullptr);

/// Embedded resolved config.
ExperimentConfig checkpoint_config(const Checkpoint& ckpt);

std::string checkpoint_filename(std::size_t epoch);
/// Checkpoint files of a directory ordered by epoch.
std::vector<std::string> list_checkpoints(const std::string& dir);

}  // namespace sparselab::runner
