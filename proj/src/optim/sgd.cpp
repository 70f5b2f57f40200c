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

#include "sparselab/optim/sgd.hpp"

#include <cmath>
#include <numbers>

#include "sparselab/kernels/kernels.hpp"

namespace sparselab::optim {

std::string lr_kind_name(LrKind kind) {
  switch (kind) {
    case LrKind::kLinearWarmupLinearDecay: return "linear";
    case LrKind::kCosine: return "cosine";
    case LrKind::kConstant: return "constant";
  }
  return "unknown";
}

LrKind parse_lr_kind(const std::string& name) {
  if (name == "linear") return LrKind::kLinearWarmupLinearDecay;
  if (name == "cosine") return LrKind::kCosine;
  if (name == "constant") return LrKind::kConstant;
  throw ConfigError("unknown lr schedule kind '" + name + "'");
}

double lr_at(const LrSchedule& s, std::size_t step) {
  if (step > s.total_steps)
    throw Error("lr_at: step " + std::to_string(step) + " beyond total " + std::to_string(s.total_steps));
  require(s.warmup_end <= s.total_steps, "lr schedule warmup_end exceeds total_steps");
  require(s.peak >= 0.0, "lr schedule peak must be non-negative");
  if (s.kind == LrKind::kConstant) return s.peak;
  if (step <= s.warmup_end) {
    if (s.warmup_end == 0) return s.total_steps == 0 ? 0.0 : s.peak;
    return s.peak * static_cast<double>(step) / static_cast<double>(s.warmup_end);
  }
  const double span = static_cast<double>(s.total_steps - s.warmup_end);
  const double frac = static_cast<double>(step - s.warmup_end) / span;
  if (s.kind == LrKind::kLinearWarmupLinearDecay)
    return s.peak * static_cast<double>(s.total_steps - step) / span;
  return s.peak * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

SgdState make_sgd_state(const nn::ParamStore& params, SgdHyper hyper, LrSchedule schedule) {
  require(hyper.momentum >= 0.0 && hyper.momentum < 1.0, "momentum must be in [0, 1)");
  require(hyper.weight_decay >= 0.0, "weight decay must be non-negative");
  SgdState st{hyper, schedule, {}};
  for (const auto& e : params.entries()) st.momentum.emplace_back(e.value.shape());
  return st;
}

void sgd_step(nn::ParamStore& params, std::span<const Tensor> grads, SgdState& state, std::size_t step) {
  sgd_step_lr(params, grads, state, lr_at(state.schedule, step));
}

void sgd_step_lr(nn::ParamStore& params, std::span<const Tensor> grads, SgdState& state, double lr) {
  require(grads.size() == params.size() && state.momentum.size() == params.size(),
          "sgd_step: gradients/state not congruent with parameters");
  const auto& k = kernels::active_kernels();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params[i];
    if (!e.trainable) continue;
    require(grads[i].shape() == e.value.shape(), "sgd_step: gradient shape mismatch for " + e.info.name);
    kernels::SgdArgs args;
    args.n = e.value.numel();
    args.weights = e.value.data();
    args.grads = grads[i].data();
    args.momentum = state.momentum[i].data();
    args.mask = e.mask ? e.mask->data() : nullptr;
    args.lr = static_cast<float>(lr);
    args.beta = static_cast<float>(state.hyper.momentum);
    args.decay = static_cast<float>(state.hyper.weight_decay);
    k.sgd_update(args);
    if (!e.value.all_finite()) throw Error("non-finite update in parameter " + e.info.name);
  }
}

std::size_t MaskChange::total() const {
  std::size_t n = 0;
  for (const auto& v : per_param) n += v.size();
  return n;
}

std::vector<std::optional<Tensor>> snapshot_masks(const nn::ParamStore& params) {
  std::vector<std::optional<Tensor>> out;
  out.reserve(params.size());
  for (const auto& e : params.entries()) out.push_back(e.mask);
  return out;
}

MaskChange diff_masks(const std::vector<std::optional<Tensor>>& before,
                      const std::vector<std::optional<Tensor>>& after) {
  require(before.size() == after.size(), "diff_masks: snapshot sizes differ");
  MaskChange out;
  out.per_param.resize(before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    const Tensor* a = before[i] ? &*before[i] : nullptr;
    const Tensor* b = after[i] ? &*after[i] : nullptr;
    if (!a && !b) continue;
    const std::size_t n = a ? a->numel() : b->numel();
    for (std::size_t j = 0; j < n; ++j) {
      const float va = a ? (*a)[j] : 1.0f;
      const float vb = b ? (*b)[j] : 1.0f;
      if (va != vb) out.per_param[i].push_back(j);
    }
  }
  return out;
}

void reset_momentum(SgdState& state, const MaskChange& changed) {
  require(changed.per_param.size() <= state.momentum.size(), "reset_momentum: too many parameters");
  for (std::size_t i = 0; i < changed.per_param.size(); ++i)
    for (std::size_t j : changed.per_param[i]) state.momentum[i].values().at(j) = 0.0f;
}

}  // namespace sparselab::optim
