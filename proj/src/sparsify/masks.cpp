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

#include "sparselab/sparsify/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparselab/core/error.hpp"

namespace sparselab::sparsify {

std::string distribution_name(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::kUniform: return "uniform";
    case DistributionKind::kGlobal: return "global";
    case DistributionKind::kErk: return "erk";
    case DistributionKind::kBlock4Global: return "block4-global";
  }
  return "?";
}

DistributionKind parse_distribution(const std::string& name) {
  if (name == "uniform") return DistributionKind::kUniform;
  if (name == "global") return DistributionKind::kGlobal;
  if (name == "erk") return DistributionKind::kErk;
  if (name == "block4-global") return DistributionKind::kBlock4Global;
  throw ConfigError("unknown sparsity distribution '" + name + "'");
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  require(k <= scores.size(), "top_k: k exceeds pool size");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (k < idx.size()) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double> erk_densities(std::span<const Shape> shapes, double global_sparsity) {
  require(global_sparsity >= 0.0 && global_sparsity < 1.0, "erk: sparsity must lie in [0, 1)");
  const std::size_t L = shapes.size();
  std::vector<double> raw(L), n(L);
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    require(!shapes[l].empty(), "erk: scalar layer");
    double sum = 0.0, prod = 1.0;
    for (std::size_t d : shapes[l]) {
      sum += static_cast<double>(d);
      prod *= static_cast<double>(d);
    }
    require(prod > 0.0, "erk: empty layer");
    raw[l] = sum / prod;
    n[l] = prod;
    total += prod;
  }
  std::vector<bool> dense(L, false);
  std::vector<double> density(L, 1.0);
  const double budget_all = (1.0 - global_sparsity) * total;
  for (;;) {
    double budget = budget_all, denom = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      if (dense[l]) budget -= n[l];
      else denom += raw[l] * n[l];
    }
    if (denom == 0.0) {
      if (std::abs(budget) > 1e-9 * total) fail("erk: infeasible budget, every layer clipped");
      return density;
    }
    const double eps = budget / denom;
    double max_prob = 0.0;
    for (std::size_t l = 0; l < L; ++l)
      if (!dense[l]) max_prob = std::max(max_prob, eps * raw[l]);
    if (max_prob > 1.0) {
      for (std::size_t l = 0; l < L; ++l)
        if (!dense[l] && eps * raw[l] == max_prob) dense[l] = true;
      continue;
    }
    for (std::size_t l = 0; l < L; ++l) density[l] = dense[l] ? 1.0 : eps * raw[l];
    return density;
  }
}

bool is_exempt(const SparsityDistribution& dist, const std::vector<std::string>& prunable_names,
               std::size_t index) {
  for (const auto& name : dist.keep_dense) {
    if (name == "@first" && index == 0) return true;
    if (name == "@last" && index + 1 == prunable_names.size()) return true;
    if (name == prunable_names[index]) return true;
  }
  return false;
}

namespace {

std::size_t kept_count(double density, std::size_t pool) {
  // Guard against 0.7 * 10 evaluating to 6.999...
  const double raw = density * static_cast<double>(pool);
  const double rounded = std::round(raw);
  const double v = std::abs(raw - rounded) < 1e-9 * std::max(1.0, raw) ? rounded : std::floor(raw);
  return std::min(pool, static_cast<std::size_t>(std::max(0.0, v)));
}

void check_eligible(const LayerWeights& layer) {
  require(layer.weights != nullptr, "magnitude_mask: missing weights for " + layer.name);
  if (layer.eligible) {
    require(layer.eligible->shape() == layer.weights->shape(),
            "magnitude_mask: eligibility shape mismatch for " + layer.name);
  }
}

bool eligible_at(const LayerWeights& layer, std::size_t j) {
  return layer.eligible == nullptr || (*layer.eligible)[j] != 0.0f;
}

// Selects `keep` entries from the pooled candidates and marks them in `masks`.
struct Candidate {
  std::size_t layer;
  std::size_t index;  // flat index, or first index of a group
  std::size_t width;  // 1, or the group length
};

void select_into(const std::vector<Candidate>& cands, const std::vector<double>& scores, std::size_t keep,
                 std::vector<Tensor>& masks) {
  keep = std::min(keep, cands.size());
  for (std::size_t c : top_k(scores, keep)) {
    const Candidate& cand = cands[c];
    float* m = masks[cand.layer].data();
    for (std::size_t w = 0; w < cand.width; ++w) m[cand.index + w] = 1.0f;
  }
}

void add_elements(const LayerWeights& layer, std::size_t l, std::vector<Candidate>& cands,
                  std::vector<double>& scores) {
  const auto w = layer.weights->span();
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (!eligible_at(layer, j)) continue;
    cands.push_back({l, j, 1});
    scores.push_back(std::abs(static_cast<double>(w[j])));
  }
}

}  // namespace

std::vector<Tensor> magnitude_mask(std::span<const LayerWeights> layers, const SparsityDistribution& dist) {
  require(dist.target >= 0.0 && dist.target < 1.0, "magnitude_mask: target sparsity must lie in [0, 1)");
  std::vector<std::string> names;
  for (const auto& layer : layers) {
    check_eligible(layer);
    names.push_back(layer.name);
  }
  std::vector<Tensor> masks;
  std::vector<bool> exempt(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    exempt[l] = is_exempt(dist, names, l);
    masks.emplace_back(layers[l].weights->shape(), exempt[l] ? 1.0f : 0.0f);
  }
  const double density = 1.0 - dist.target;

  switch (dist.kind) {
    case DistributionKind::kGlobal: {
      std::vector<Candidate> cands;
      std::vector<double> scores;
      std::size_t pool = 0;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (exempt[l]) continue;
        pool += layers[l].weights->numel();
        add_elements(layers[l], l, cands, scores);
      }
      select_into(cands, scores, kept_count(density, pool), masks);
      break;
    }
    case DistributionKind::kUniform:
    case DistributionKind::kErk: {
      std::vector<std::size_t> active;
      std::vector<Shape> shapes;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (exempt[l]) continue;
        active.push_back(l);
        shapes.push_back(layers[l].weights->shape());
      }
      std::vector<double> dens(active.size(), density);
      if (dist.kind == DistributionKind::kErk && !active.empty()) dens = erk_densities(shapes, dist.target);
      for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t l = active[a];
        std::vector<Candidate> cands;
        std::vector<double> scores;
        add_elements(layers[l], l, cands, scores);
        select_into(cands, scores, kept_count(dens[a], layers[l].weights->numel()), masks);
      }
      break;
    }
    case DistributionKind::kBlock4Global: {
      std::vector<Candidate> cands;
      std::vector<double> scores;
      std::size_t pool = 0;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (exempt[l]) continue;
        const auto w = layers[l].weights->span();
        pool += w.size();
        for (std::size_t g = 0; g < w.size(); g += 4) {
          const std::size_t width = std::min<std::size_t>(4, w.size() - g);
          bool ok = true;
          double l1 = 0.0;
          for (std::size_t j = g; j < g + width; ++j) {
            ok = ok && eligible_at(layers[l], j);
            l1 += std::abs(static_cast<double>(w[j]));
          }
          if (!ok) continue;
          cands.push_back({l, g, width});
          scores.push_back(l1);
        }
      }
      // Whole groups in score order until the next one would overshoot the
      // weight budget; trailing partial groups make the budget count weights.
      std::vector<std::size_t> order(cands.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
      const std::size_t budget = kept_count(density, pool);
      std::size_t kept = 0;
      for (std::size_t c : order) {
        const Candidate& cand = cands[c];
        if (kept + cand.width > budget) break;
        kept += cand.width;
        float* m = masks[cand.layer].data();
        for (std::size_t w = 0; w < cand.width; ++w) m[cand.index + w] = 1.0f;
      }
      break;
    }
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (exempt[l] || masks[l].numel() == 0) continue;
    bool any = false;
    for (float v : masks[l].span()) any = any || v != 0.0f;
    if (!any) fail("layer collapse: every weight of '" + layers[l].name + "' was pruned");
  }
  return masks;
}

std::vector<std::size_t> prunable_indices(const nn::ParamStore& params) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].info.prunable) out.push_back(i);
  return out;
}

void apply_magnitude_masks(nn::ParamStore& params, const SparsityDistribution& dist, bool nested) {
  const auto idx = prunable_indices(params);
  std::vector<LayerWeights> layers;
  for (std::size_t i : idx) {
    const auto& e = params[i];
    layers.push_back({e.info.name, &e.value, nested && e.mask ? &*e.mask : nullptr});
  }
  auto masks = magnitude_mask(layers, dist);
  for (std::size_t a = 0; a < idx.size(); ++a) params.set_mask(idx[a], std::move(masks[a]));
}

void apply_dense_masks(nn::ParamStore& params) {
  for (std::size_t i : prunable_indices(params)) params.set_mask(i, Tensor(params[i].value.shape(), 1.0f));
}

void acdc_apply(PhaseKind kind, nn::ParamStore& params, const SparsityDistribution& dist, double target,
                double decompression_sparsity) {
  switch (kind) {
    case PhaseKind::kDenseWarmup:
      params.clear_masks();
      return;
    case PhaseKind::kCompressed: {
      SparsityDistribution d = dist;
      d.target = target;
      apply_magnitude_masks(params, d);
      return;
    }
    case PhaseKind::kDecompressed: {
      require(decompression_sparsity >= 0.0 && decompression_sparsity <= target,
              "acdc: decompression sparsity must lie in [0, target]");
      if (decompression_sparsity == 0.0) {
        apply_dense_masks(params);
        return;
      }
      SparsityDistribution d = dist;
      d.target = decompression_sparsity;
      apply_magnitude_masks(params, d);
      return;
    }
  }
}

double masked_sparsity(const nn::ParamStore& params, const SparsityDistribution& dist) {
  const auto idx = prunable_indices(params);
  std::vector<std::string> names;
  for (std::size_t i : idx) names.push_back(params[i].info.name);
  std::size_t total = 0, zeros = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (is_exempt(dist, names, a)) continue;
    const auto& e = params[idx[a]];
    total += e.value.numel();
    if (!e.mask) continue;
    for (float v : e.mask->span()) zeros += v == 0.0f;
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

double zero_fraction(const nn::ParamStore& params) {
  std::size_t total = 0, zeros = 0;
  for (std::size_t i : prunable_indices(params)) {
    for (float v : params[i].value.span()) zeros += v == 0.0f;
    total += params[i].value.numel();
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

}  // namespace sparselab::sparsify
