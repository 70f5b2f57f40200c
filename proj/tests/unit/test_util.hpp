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

#include <cmath>
#include <vector>

#include "sparselab/core/model.hpp"
#include "sparselab/core/rng.hpp"

namespace sparselab::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (float& v : t.span()) v = static_cast<float>(scale * rng.normal());
  return t;
}

inline nn::ModelSpec tiny_mlp(std::vector<std::size_t> dims = {3, 4, 2}) { return {nn::MlpSpec{std::move(dims)}}; }

inline nn::ModelSpec tiny_cnn() {
  nn::CnnSpec s;
  s.in_channels = 1;
  s.height = 4;
  s.width = 4;
  s.conv1_channels = 2;
  s.conv2_channels = 2;
  s.classes = 3;
  return {s};
}

inline nn::ModelSpec tiny_transformer(std::size_t blocks = 1) {
  nn::TransformerSpec s;
  s.vocab = 5;
  s.max_seq_len = 4;
  s.model_dim = 4;
  s.blocks = blocks;
  s.mlp_hidden = 6;
  s.classes = 2;
  return {s};
}

/// Batch of `n` valid inputs for the architecture.
inline Tensor random_inputs(const nn::ModelSpec& spec, std::size_t n, Rng& rng) {
  const std::size_t w = spec.input_width();
  Tensor x({n, w});
  if (spec.kind() == nn::Architecture::kTinyTransformer) {
    const auto vocab = std::get<nn::TransformerSpec>(spec.arch).vocab;
    for (float& v : x.span()) v = static_cast<float>(rng.below(vocab));
  } else {
    for (float& v : x.span()) v = static_cast<float>(rng.normal());
  }
  return x;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.below(classes));
  return y;
}

inline std::vector<TensorD> to_double(const nn::ParamStore& p) {
  std::vector<TensorD> out;
  for (const auto& e : p.entries()) out.push_back(e.value.cast<double>());
  return out;
}

/// Largest |analytic - fd| / (|fd| + 1e-8) over every coordinate, with
/// central differences of step h (the five-point stencil when `order4`).
inline double max_gradcheck_error(const nn::ModelSpec& spec, std::vector<TensorD> params, const TensorD& batch,
                                  const std::vector<int>& labels, double smoothing, double h = 1e-4,
                                  bool order4 = true) {
  nn::LossConfig loss{smoothing};
  std::vector<TensorD> grads;
  nn::loss_and_grad<double>(spec, params, batch, labels, loss, &grads);
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t j = 0; j < params[p].numel(); ++j) {
      const double keep = params[p][j];
      auto at = [&](double offset) {
        params[p][j] = keep + offset;
        return nn::loss_and_grad<double>(spec, params, batch, labels, loss, nullptr);
      };
      const double fd = order4 ? (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h)
                               : (at(h) - at(-h)) / (2.0 * h);
      params[p][j] = keep;
      const double an = grads[p][j];
      worst = std::max(worst, std::abs(fd - an) / (std::abs(fd) + 1e-8));
    }
  }
  return worst;
}

}  // namespace sparselab::testing
