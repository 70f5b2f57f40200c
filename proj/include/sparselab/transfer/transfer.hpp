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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sparselab/core/model.hpp"
#include "sparselab/runner/data.hpp"

namespace sparselab::transfer {

enum class ParamClass { kSparseLinearWeight, kBias, kNorm, kHead, kEmbedding };

std::string param_class_name(ParamClass c);

struct LayerGroup {
  std::string name;
  std::vector<std::string> params;
};

/// [stem, block_1 .. block_B, head]. For the transformer the stem holds the
/// embeddings; MLP and CNN have an empty stem and one block per hidden layer.
struct LayerGroups {
  std::vector<LayerGroup> groups;
  std::map<std::string, ParamClass> classes;

  std::size_t blocks() const { return groups.size() - 2; }
  /// B + 2
  std::size_t stages() const { return groups.size(); }
};

LayerGroups layer_groups(const nn::ModelSpec& spec);

/// Stage 0: head, biases and norms. Stage k (1..B): additionally the weights
/// of the k rearmost blocks. Stage B+1: everything.
std::set<std::string> trainable_set(const LayerGroups& groups, std::size_t stage);

/// Copies the body of a pretrained model (weights and masks) under a freshly
/// initialized dense head sized for `classes`.
nn::Model attach_head(const nn::Model& pretrained, std::size_t classes, std::uint64_t seed);

struct TransferHyper {
  double lr = 0.05;
  std::size_t batch_size = 64;
  std::size_t eval_batch_size = 1000;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double label_smoothing = 0.0;
  bool early_stopping = true;
  std::size_t patience = 2;
  std::uint64_t seed = 0;
  /// Runs only the first `max_stages` stages when nonzero.
  std::size_t max_stages = 0;
};

/// Linear decay from `lr0` at the first of `steps` steps to 0 at the last.
double rewound_lr(double lr0, std::size_t step, std::size_t steps);

struct StageRecord {
  std::size_t stage = 0;
  std::size_t trainable_params = 0;
  double lr_first = 0.0;
  double lr_last = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_top1 = 0.0;
  bool best = false;
  /// Parameters whose values moved during the stage.
  std::vector<std::string> changed;
};

struct TransferResult {
  /// Best-scoring snapshot when early stopping is on, else the last stage.
  nn::Model model;
  std::vector<StageRecord> stages;
  bool stopped_early = false;
};

/// Gradual back-to-front unfreezing, one epoch per stage with the learning
/// rate rewound to `lr` at every stage start. Masks never change; a mask or
/// frozen-parameter mutation raises an Error.
TransferResult transfer_run(nn::Model model, const runner::DataSplits& task, const TransferHyper& hyper);

enum class RecipeMode { kDenseRecipe, kRescaled };
enum class Finetune { kLinear, kFull };

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t total_steps = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_top1 = 0.0;
};

struct RecipeResult {
  nn::Model model;
  std::vector<EpochRecord> epochs;
};

/// Plain finetuning with a linear decay over the whole run: dense-recipe uses
/// 3 epochs, rescaled uses `epochs`. Linear mode trains the head only.
RecipeResult baseline_recipe(nn::Model model, const runner::DataSplits& task, RecipeMode mode, Finetune finetune,
                             std::size_t epochs, const TransferHyper& hyper);

/// One rescaled run per entry of `epoch_list`; returns the final record of each.
std::vector<EpochRecord> rescaled_sweep(const nn::Model& model, const runner::DataSplits& task,
                                        const std::vector<std::size_t>& epoch_list, Finetune finetune,
                                        const TransferHyper& hyper);

std::string stages_csv(const std::vector<StageRecord>& stages);
std::string epochs_csv(const std::vector<EpochRecord>& epochs);

}  // namespace sparselab::transfer
