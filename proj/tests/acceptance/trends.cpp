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

// Training-trend criteria: each compares full runs across methods, budgets or
// weight decays on small synthetic tasks, over three seeds.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "outcome.hpp"
#include "sparselab/diagnostics/metrics.hpp"
#include "sparselab/runner/checkpoint.hpp"
#include "sparselab/runner/config.hpp"
#include "sparselab/runner/experiment.hpp"
#include "sparselab/sparsify/masks.hpp"

namespace fs = std::filesystem;
using namespace sparselab;
using runner::Json;

namespace {

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("sparselab_trends_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  return d;
}

/// Ten-class blobs in 784 dimensions; many tight clusters per class make
/// accuracy limited by fitting rather than by label noise.
Json blob_run(std::uint64_t seed, const std::string& method, double multiplier) {
  Json j = Json::parse(R"({
    "model": {"arch": "mlp", "dims": [784, 64, 32, 10]},
    "dataset": {"kind": "synthetic-blobs", "train_size": 4000, "val_size": 4000, "data_seed": 7, "classes": 10,
                "dim": 784, "clusters_per_class": 16, "separation": 4.0, "noise": 0.15},
    "target_sparsity": 0.95, "epochs": 10, "batch_size": 64,
    "optimizer": {"peak_lr": 0.05, "warmup_epochs": 1, "weight_decay": 5e-5, "label_smoothing": 0.0},
    "acdc": {"warmup_epochs": 1, "phase_len": 1, "last_decompression": 2, "last_compression": 2},
    "gmp": {"update_every": 1},
    "checkpoint": {"enabled": false}
  })");
  j["seed"] = seed;
  j["method"] = method;
  j["multiplier"] = multiplier;
  return j;
}

const diag::MetricRow& last_row(const runner::RunResult& r, const std::string& split) {
  for (auto it = r.rows.rbegin(); it != r.rows.rend(); ++it)
    if (it->split == split) return *it;
  throw Error("no " + split + " rows");
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

Outcome undertraining_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  int fit_ok = 0, gain_ok = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    auto run = [&](const std::string& method, double mult) {
      Json j = blob_run(seed, method, mult);
      j["diagnostics"] = {{"train_metrics", true}};
      return runner::run_experiment(runner::parse_experiment(j), "");
    };
    const auto d1 = run("dense", 1), d4 = run("dense", 4), s1 = run("acdc", 1), s4 = run("acdc", 4);
    const bool fit = last_row(s1, "train").mean_ce > last_row(d1, "train").mean_ce &&
                     last_row(s1, "val").mean_entropy > last_row(d1, "val").mean_entropy;
    const double sparse_gain = last_row(s4, "val").top1 - last_row(s1, "val").top1;
    const double dense_gain = last_row(d4, "val").top1 - last_row(d1, "val").top1;
    const bool gain = sparse_gain >= 0.005 && dense_gain < sparse_gain;
    fit_ok += fit;
    gain_ok += gain;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": train CE " +
              fmt("%.4f", last_row(s1, "train").mean_ce) + " vs dense " + fmt("%.4f", last_row(d1, "train").mean_ce) +
              ", val entropy " + fmt("%.4f", last_row(s1, "val").mean_entropy) + " vs " +
              fmt("%.4f", last_row(d1, "val").mean_entropy) + ", 4x gain sparse " + fmt("%+.2f", 100 * sparse_gain) +
              " pts dense " + fmt("%+.2f", 100 * dense_gain) + " pts";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.pass = fit_ok >= 2 && gain_ok >= 2 && secs < 900.0;
  o.detail = "fit gap " + std::to_string(fit_ok) + "/3, extended-budget gain " + std::to_string(gain_ok) + "/3 (" +
             detail + "); " + fmt("%.0f s", secs) + " (limit 900 s)";
  return o;
}

/// Mean IoU of consecutive epoch checkpoints over the second half of a
/// 100-epoch run. Consecutive-epoch IoU is set by how much each schedule
/// changes per epoch, so the budget must be long enough that the cubic ramp
/// moves in small steps; at 10-40 epochs each ramp step alone drops GMP below RigL.
double second_half_iou(const std::string& method, std::uint64_t seed) {
  Json j = blob_run(seed, method, 10);
  j["checkpoint"] = {{"every", 1}};
  const auto dir = scratch(method + std::to_string(seed));
  const auto cfg = runner::parse_experiment(j);
  const auto res = runner::run_experiment(cfg, dir.string());
  std::vector<std::vector<Tensor>> supports;
  for (std::size_t e = cfg.total_epochs() / 2; e < cfg.total_epochs(); ++e) {
    const auto m = runner::restore_model(runner::load_checkpoint((dir / runner::checkpoint_filename(e)).string()));
    supports.push_back(diag::prunable_weights(m.params));
  }
  std::vector<double> ious;
  for (std::size_t k = 1; k < supports.size(); ++k) ious.push_back(diag::mask_iou(supports[k - 1], supports[k]));
  fs::remove_all(dir);
  return mean(ious);
}

Outcome mask_exploration_trend() {
  int ordered = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const double g = second_half_iou("gmp", seed), r = second_half_iou("rigl", seed), a = second_half_iou("acdc", seed);
    ordered += a < r && r <= g;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": acdc " + fmt("%.3f", a) +
              " rigl " + fmt("%.3f", r) + " gmp " + fmt("%.3f", g);
  }
  Outcome o;
  o.pass = ordered >= 2;
  o.detail = "AC/DC < RigL <= GMP in " + std::to_string(ordered) + "/3 seeds (mean second-half IoU " + detail + ")";
  return o;
}

/// Micro-CNN AC/DC on the standard 100-epoch schedule; returns the exact-zero
/// fraction of prunable weights at the end of the final decompressed phase.
double decompressed_zero_fraction(std::uint64_t seed, double weight_decay) {
  Json j = Json::parse(R"({
    "model": {"arch": "micro-cnn", "in_channels": 1, "height": 8, "width": 8, "conv1_channels": 8,
              "conv2_channels": 32, "classes": 10},
    "dataset": {"kind": "synthetic-blobs", "train_size": 2000, "val_size": 500, "data_seed": 9, "classes": 10,
                "dim": 64, "clusters_per_class": 2, "separation": 4.0, "noise": 0.5},
    "method": "acdc", "target_sparsity": 0.95, "epochs": 100, "batch_size": 4,
    "optimizer": {"peak_lr": 0.01, "warmup_epochs": 1, "label_smoothing": 0.0},
    "checkpoint": {"align": "acdc-phases"}
  })");
  j["seed"] = seed;
  j["optimizer"]["weight_decay"] = weight_decay;
  const auto cfg = runner::parse_experiment(j);
  const auto dir = scratch("wd" + std::to_string(seed) + "_" + fmt("%g", weight_decay));
  runner::run_experiment(cfg, dir.string());
  const auto phases = sparsify::acdc_phases(runner::acdc_schedule(cfg));
  std::size_t end = 0;
  for (const auto& p : phases)
    if (p.kind == sparsify::PhaseKind::kDecompressed) end = p.end() - 1;
  const auto m = runner::restore_model(runner::load_checkpoint((dir / runner::checkpoint_filename(end)).string()));
  fs::remove_all(dir);
  return sparsify::zero_fraction(m.params);
}

Outcome weight_decay_trend() {
  const double decays[] = {1e-5, 1e-4, 1e-3};
  int monotone = 0;
  double pooled[3] = {0.0, 0.0, 0.0};
  std::string detail;
  for (auto seed : kSeeds) {
    std::vector<double> z;
    for (std::size_t k = 0; k < 3; ++k) {
      z.push_back(decompressed_zero_fraction(seed, decays[k]));
      pooled[k] += z.back() / 3.0;
    }
    monotone += z[0] <= z[1] && z[1] <= z[2];
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": " +
              fmt("%.4f", z[0]) + " / " + fmt("%.4f", z[1]) + " / " + fmt("%.4f", z[2]);
  }
  Outcome o;
  o.pass = monotone >= 2;
  o.detail = "zero fraction non-decreasing in weight decay (1e-5 / 1e-4 / 1e-3) in " + std::to_string(monotone) +
             "/3 seeds (" + detail + "); seed mean " + fmt("%.4f", pooled[0]) + " / " + fmt("%.4f", pooled[1]) +
             " / " + fmt("%.4f", pooled[2]);
  return o;
}
