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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sparselab/core/rng.hpp"
#include "sparselab/core/tape.hpp"
#include "sparselab/core/tensor.hpp"

namespace sparselab::nn {

struct MlpSpec {
  /// Layer widths including input and classes, e.g. {784, 256, 128, 10}.
  std::vector<std::size_t> dims{784, 256, 128, 10};
};

/// conv3x3 -> relu -> conv3x3 -> relu -> maxpool2 -> linear head.
struct CnnSpec {
  std::size_t in_channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t classes = 10;
};

/// Pre-norm transformer encoder with single-head attention, mean pooling and a
/// linear classifier head.
struct TransformerSpec {
  std::size_t vocab = 16;
  std::size_t max_seq_len = 16;
  std::size_t model_dim = 32;
  std::size_t blocks = 2;
  std::size_t mlp_hidden = 64;
  std::size_t classes = 2;
  double dropout = 0.0;
};

enum class Architecture { kMlp, kMicroCnn, kTinyTransformer };

struct ModelSpec {
  std::variant<MlpSpec, CnnSpec, TransformerSpec> arch = MlpSpec{};

  Architecture kind() const { return static_cast<Architecture>(arch.index()); }
  std::size_t num_classes() const;
  /// Features per example (tokens per sequence for the transformer).
  std::size_t input_width() const;
  bool accepts_width(std::size_t width) const;
};

std::string architecture_name(Architecture a);

enum class ParamRole { kWeight, kBias, kNorm, kEmbedding };
enum class LayerKind { kLinear, kConv, kOther };

struct ParamInfo {
  std::string name;
  Shape shape;
  ParamRole role = ParamRole::kWeight;
  LayerKind layer = LayerKind::kOther;
  /// Transformer block index (0-based); -1 outside blocks.
  int block = -1;
  bool is_head = false;
  /// Linear and convolution weights only; biases and norms never.
  bool prunable = false;
  std::size_t fan_in = 0;
  /// Times the layer is applied per example: tokens for transformer linears,
  /// output pixels for convolutions, 1 otherwise.
  std::size_t applications = 1;
};

/// Ordered parameter list of the architecture.
std::vector<ParamInfo> describe_params(const ModelSpec& spec);

struct ParamEntry {
  ParamInfo info;
  Tensor value;
  /// Binary (0.0/1.0) tensor of the same shape when a sparsity mask is active.
  std::optional<Tensor> mask;
  bool trainable = true;
};

/// Named parameters in architecture order. Invariant: when an entry carries a
/// mask, every masked-out weight is exactly 0.0.
class ParamStore {
 public:
  void add(ParamInfo info, Tensor value);

  std::size_t size() const { return entries_.size(); }
  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  ParamEntry& operator[](std::size_t i) { return entries_[i]; }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }

  std::optional<std::size_t> find(const std::string& name) const;
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;

  /// Installs a mask and zeroes the weights it removes.
  void set_mask(std::size_t i, Tensor mask);
  void clear_masks();
  /// Re-zeroes masked weights; returns false if any masked weight was nonzero.
  bool enforce_masks();
  void set_all_trainable(bool trainable);

  std::size_t total_params() const;

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

struct Model {
  ModelSpec spec;
  ParamStore params;
};

/// Kaiming-uniform (fan-in) for linear and conv weights, N(0, 0.02) for all
/// transformer matrices and embeddings, zero biases, unit norm scales.
Model make_model(const ModelSpec& spec, Rng& init_rng);

struct ForwardMode {
  bool train = false;
  Rng* dropout_rng = nullptr;
};

/// Builds the logits graph on `tape` from parameter vars in describe_params order.
template <class T>
Var build_logits(Tape<T>& tape, const ModelSpec& spec, std::span<const Var> params,
                 const BasicTensor<T>& batch, const ForwardMode& mode);

/// Logits (N, C) for a batch (N, input_width).
Tensor forward(const Model& model, const Tensor& batch);

struct LossConfig {
  double label_smoothing = 0.0;
};

struct GradResult {
  double loss = 0.0;
  /// One tensor per parameter in store order; empty for frozen parameters.
  std::vector<Tensor> grads;
};

/// Gradient of the mean (smoothed) cross-entropy over the batch.
GradResult grad(const Model& model, const Tensor& batch, std::span<const int> labels,
                const LossConfig& loss, const ForwardMode& mode = {});

/// Same computation on explicit parameter values of any precision; all
/// parameters receive gradients. Used by gradient and Hessian oracles.
template <class T>
double loss_and_grad(const ModelSpec& spec, const std::vector<BasicTensor<T>>& params,
                     const BasicTensor<T>& batch, std::span<const int> labels, const LossConfig& loss,
                     std::vector<BasicTensor<T>>* grads);

}  // namespace sparselab::nn
