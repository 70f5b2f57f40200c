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

#include "sparselab/diagnostics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sparselab/core/error.hpp"
#include "sparselab/core/loss.hpp"

namespace sparselab::diag {

double entropy(std::span<const float> logits) {
  require(logits.size() >= 2, "entropy: need at least two classes");
  double mx = -INFINITY;
  for (float z : logits) {
    if (!std::isfinite(z)) fail("entropy: non-finite logits");
    mx = std::max(mx, static_cast<double>(z));
  }
  double sum = 0.0;
  for (float z : logits) sum += std::exp(static_cast<double>(z) - mx);
  const double log_sum = std::log(sum);
  double h = 0.0;
  for (float z : logits) {
    const double log_p = static_cast<double>(z) - mx - log_sum;
    h -= std::exp(log_p) * log_p;
  }
  return std::max(0.0, h);
}

namespace {

bool uncertain(double z) {
  const auto p = static_cast<float>(1.0 / (1.0 + std::exp(-z)));
  return p > 0.1f && p < 0.9f;
}

}  // namespace

double uncertainty_fraction(std::span<const float> binary_logits) {
  require(!binary_logits.empty(), "uncertainty_fraction: empty input");
  std::size_t n = 0;
  for (float z : binary_logits) {
    if (!std::isfinite(z)) fail("uncertainty_fraction: non-finite logits");
    n += uncertain(z);
  }
  return static_cast<double>(n) / static_cast<double>(binary_logits.size());
}

Tensor support_of(const Tensor& t) {
  Tensor s(t.shape());
  for (std::size_t j = 0; j < t.numel(); ++j) s[j] = t[j] != 0.0f ? 1.0f : 0.0f;
  return s;
}

double mask_iou(std::span<const Tensor> a, std::span<const Tensor> b) {
  require(a.size() == b.size(), "mask_iou: different layer counts");
  std::size_t inter = 0, uni = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    require(a[l].shape() == b[l].shape(), "mask_iou: shape mismatch at layer " + std::to_string(l));
    for (std::size_t j = 0; j < a[l].numel(); ++j) {
      const bool x = a[l][j] != 0.0f, y = b[l][j] != 0.0f;
      inter += x && y;
      uni += x || y;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Tensor> prunable_weights(const nn::ParamStore& params) {
  std::vector<Tensor> out;
  for (const auto& e : params.entries()) {
    if (!e.info.prunable) continue;
    Tensor w = e.value;
    if (e.mask) {
      for (std::size_t j = 0; j < w.numel(); ++j) w[j] *= (*e.mask)[j];
    }
    out.push_back(std::move(w));
  }
  return out;
}

double ChannelSparsity::global() const {
  if (channels == 0) fail("channel sparsity: model has no convolution layers");
  return static_cast<double>(zero_channels) / static_cast<double>(channels);
}

ChannelSparsity channel_sparsity(const nn::ParamStore& params) {
  ChannelSparsity out;
  for (const auto& e : params.entries()) {
    if (e.info.layer != nn::LayerKind::kConv || e.info.role != nn::ParamRole::kWeight) continue;
    require(e.value.rank() == 4, "channel sparsity: conv weight must be (out, in, kH, kW)");
    const std::size_t oc = e.value.dim(0), slice = e.value.numel() / oc;
    std::size_t zero = 0;
    for (std::size_t c = 0; c < oc; ++c) {
      bool all_zero = true;
      for (std::size_t j = c * slice; j < (c + 1) * slice && all_zero; ++j) {
        const float m = e.mask ? (*e.mask)[j] : 1.0f;
        all_zero = e.value[j] * m == 0.0f;
      }
      zero += all_zero;
    }
    out.per_layer.push_back(static_cast<double>(zero) / static_cast<double>(oc));
    out.zero_channels += zero;
    out.channels += oc;
  }
  return out;
}

FlopsReport flops(const nn::ParamStore& params) {
  FlopsReport r;
  double weighted = 0.0;
  for (const auto& e : params.entries()) {
    if (e.info.role != nn::ParamRole::kWeight) continue;
    if (e.info.layer == nn::LayerKind::kOther) fail("flops: unknown layer kind for " + e.info.name);
    const double f = 2.0 * static_cast<double>(e.value.numel()) * static_cast<double>(e.info.applications);
    double density = 1.0;
    if (e.mask) {
      std::size_t nnz = 0;
      for (float m : e.mask->span()) nnz += m != 0.0f;
      density = static_cast<double>(nnz) / static_cast<double>(e.mask->numel());
    }
    r.dense += f;
    weighted += density * f;
  }
  r.proportion = r.dense > 0.0 ? weighted / r.dense : 1.0;
  return r;
}

double aie(std::span<const double> err_model, std::span<const double> err_base) {
  require(err_model.size() == err_base.size(), "aie: task sets differ");
  require(!err_base.empty(), "aie: empty task set");
  double sum = 0.0;
  for (std::size_t t = 0; t < err_base.size(); ++t) {
    if (err_base[t] == 0.0) fail("aie: zero baseline error on task " + std::to_string(t));
    sum += (err_model[t] - err_base[t]) / err_base[t];
  }
  return sum / static_cast<double>(err_base.size());
}

void LogitAccumulator::add(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() == 2 && logits.dim(0) == labels.size(), "metrics: logits/labels mismatch");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (classes_ == 0) classes_ = c;
  require(classes_ == c, "metrics: class count changed between batches");
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const float> row(logits.data() + i * c, c);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct_ += best == static_cast<std::size_t>(labels[i]);
    entropy_sum_ += entropy(row);
    ce_sum_ += nn::loss_ce(row, labels[i]);
    if (c == 2) uncertain_ += uncertain(static_cast<double>(row[1]) - static_cast<double>(row[0]));
  }
  count_ += n;
}

LogitSummary LogitAccumulator::summary() const {
  LogitSummary s;
  s.count = count_;
  if (count_ == 0) return s;
  const double n = static_cast<double>(count_);
  s.top1 = static_cast<double>(correct_) / n;
  s.mean_entropy = entropy_sum_ / n;
  s.mean_ce = ce_sum_ / n;
  if (classes_ == 2) s.uncertainty = static_cast<double>(uncertain_) / n;
  return s;
}

}  // namespace sparselab::diag
