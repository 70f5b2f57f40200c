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

#include "sparselab/landscape/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparselab/core/error.hpp"
#include "sparselab/core/rng.hpp"

namespace sparselab::landscape {

ModelOracle::ModelOracle(nn::ModelSpec spec, const nn::ParamStore& layout, Tensor batch, std::vector<int> labels)
    : spec_(std::move(spec)), batch_(batch.cast<double>()), labels_(std::move(labels)) {
  for (const auto& e : layout.entries()) {
    shapes_.push_back(e.value.shape());
    dim_ += e.value.numel();
  }
}

double ModelOracle::loss_grad(std::span<const double> w, std::span<double> grad) const {
  require(w.size() == dim_ && grad.size() == dim_, "oracle: parameter vector has wrong length");
  std::vector<TensorD> params;
  std::size_t at = 0;
  for (const auto& shape : shapes_) {
    TensorD t(shape);
    std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(at), t.numel(), t.data());
    at += t.numel();
    params.push_back(std::move(t));
  }
  std::vector<TensorD> grads;
  const double loss = nn::loss_and_grad<double>(spec_, params, batch_, labels_, {}, &grads);
  at = 0;
  for (const auto& g : grads) {
    std::copy_n(g.data(), g.numel(), grad.begin() + static_cast<std::ptrdiff_t>(at));
    at += g.numel();
  }
  return loss;
}

std::vector<double> flatten(const nn::ParamStore& params) {
  std::vector<double> out;
  out.reserve(params.total_params());
  for (const auto& e : params.entries())
    for (float v : e.value.span()) out.push_back(v);
  return out;
}

std::vector<double> mask_support(const nn::ParamStore& params) {
  std::vector<double> out;
  out.reserve(params.total_params());
  for (const auto& e : params.entries()) {
    for (std::size_t j = 0; j < e.value.numel(); ++j) out.push_back(e.mask ? ((*e.mask)[j] != 0.0f ? 1.0 : 0.0) : 1.0);
  }
  return out;
}

namespace {

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void project(std::span<double> x, std::span<const double> support) {
  if (support.empty()) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= support[i];
}

}  // namespace

std::vector<double> hvp(const GradientOracle& oracle, std::span<const double> w, std::span<const double> v,
                        std::span<const double> support) {
  const std::size_t n = oracle.dim();
  require(w.size() == n && v.size() == n, "hvp: vector length mismatch");
  require(support.empty() || support.size() == n, "hvp: support length mismatch");
  const double vmax = max_abs(v);
  std::vector<double> out(n, 0.0);
  if (vmax == 0.0) return out;
  const double eps = 1e-3 * (1.0 + max_abs(w)) / std::max(1.0, vmax);
  std::vector<double> wp(n), wm(n), gp(n), gm(n);
  for (std::size_t i = 0; i < n; ++i) {
    wp[i] = w[i] + eps * v[i];
    wm[i] = w[i] - eps * v[i];
  }
  oracle.loss_grad(wp, gp);
  oracle.loss_grad(wm, gm);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (gp[i] - gm[i]) / (2.0 * eps);
    if (!std::isfinite(out[i])) fail("hvp: non-finite gradients");
  }
  project(out, support);
  return out;
}

SharpnessResult power_iteration(const GradientOracle& oracle, std::span<const double> w,
                                std::span<const double> support, std::size_t iters, std::uint64_t seed,
                                bool flip_start) {
  require(iters >= 1, "sharpness: need at least one power iteration");
  const std::size_t n = oracle.dim();
  Rng rng = Rng::substream(seed, Stream::kSharpness);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  project(v, support);
  double norm = std::sqrt(dot(v, v));
  SharpnessResult r;
  if (norm == 0.0) {
    r.degenerate = true;
    return r;
  }
  for (double& x : v) x /= flip_start ? -norm : norm;

  for (std::size_t it = 0; it < iters; ++it) {
    auto hv = hvp(oracle, w, v, support);
    r.rayleigh.push_back(dot(v, hv));
    norm = std::sqrt(dot(hv, hv));
    if (norm == 0.0) {
      r.degenerate = true;
      r.value = 0.0;
      return r;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = hv[i] / norm;
  }
  const auto hv = hvp(oracle, w, v, support);
  r.value = dot(v, hv);
  r.rayleigh.push_back(r.value);
  return r;
}

SharpnessResult sharpness(const nn::Model& model, const Tensor& inputs, std::span<const int> labels,
                          const SharpnessConfig& cfg) {
  require(inputs.rank() == 2 && inputs.dim(0) == labels.size(), "sharpness: inputs/labels mismatch");
  const std::size_t total = inputs.dim(0), width = inputs.dim(1);
  std::vector<std::size_t> rows(total);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (total > cfg.batch_size) {
    Rng pick = Rng::substream(cfg.seed, Stream::kSharpness);
    rows = pick.permutation(total);
    rows.resize(cfg.batch_size);
    std::sort(rows.begin(), rows.end());
  }
  Tensor batch({rows.size(), width});
  std::vector<int> y;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(inputs.data() + rows[r] * width, width, batch.data() + r * width);
    y.push_back(labels[rows[r]]);
  }
  ModelOracle oracle(model.spec, model.params, std::move(batch), std::move(y));
  const auto w = flatten(model.params);
  const auto support = cfg.restrict_to_mask ? mask_support(model.params) : std::vector<double>{};
  return power_iteration(oracle, w, support, cfg.power_iters, cfg.seed);
}

nn::ParamStore blend(const nn::ParamStore& a, const nn::ParamStore& b, double lambda, bool apply_masks) {
  require(a.size() == b.size(), "interpolate: architecture mismatch between checkpoints");
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i].info.name == b[i].info.name && a[i].value.shape() == b[i].value.shape(),
            "interpolate: architecture mismatch between checkpoints");
  }
  if (lambda == 0.0) return a;
  if (lambda == 1.0) return b;
  nn::ParamStore out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ea = a[i];
    const auto& eb = b[i];
    Tensor v(ea.value.shape());
    for (std::size_t j = 0; j < v.numel(); ++j) {
      double xa = ea.value[j], xb = eb.value[j];
      if (apply_masks) {
        if (ea.mask) xa *= (*ea.mask)[j];
        if (eb.mask) xb *= (*eb.mask)[j];
      }
      v[j] = static_cast<float>((1.0 - lambda) * xa + lambda * xb);
    }
    out.add(ea.info, std::move(v));
    if (apply_masks && (ea.mask || eb.mask)) {
      Tensor m(ea.value.shape(), 0.0f);
      for (std::size_t j = 0; j < m.numel(); ++j) {
        const bool on_a = !ea.mask || (*ea.mask)[j] != 0.0f;
        const bool on_b = !eb.mask || (*eb.mask)[j] != 0.0f;
        m[j] = on_a || on_b ? 1.0f : 0.0f;
      }
      out.set_mask(i, std::move(m));
    }
  }
  return out;
}

std::vector<PathRow> interpolate_path(std::span<const nn::ParamStore> checkpoints, std::size_t segments,
                                      const std::vector<std::pair<std::string, LossEval>>& splits,
                                      bool apply_masks) {
  require(checkpoints.size() >= 2, "interpolate: need at least two checkpoints");
  require(segments >= 1, "interpolate: need at least one segment per interval");
  const std::size_t intervals = checkpoints.size() - 1;
  std::vector<PathRow> rows;
  for (std::size_t k = 0; k < intervals; ++k) {
    for (std::size_t s = k == 0 ? 0 : 1; s <= segments; ++s) {
      const double lambda = static_cast<double>(s) / static_cast<double>(segments);
      const nn::ParamStore point = blend(checkpoints[k], checkpoints[k + 1], lambda, apply_masks);
      const double alpha = (static_cast<double>(k) + lambda) / static_cast<double>(intervals);
      for (const auto& [name, eval] : splits) rows.push_back({alpha, name, eval(point)});
    }
  }
  return rows;
}

}  // namespace sparselab::landscape
