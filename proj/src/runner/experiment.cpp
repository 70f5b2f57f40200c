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

#include "sparselab/runner/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "sparselab/core/error.hpp"
#include "sparselab/runner/checkpoint.hpp"
#include "sparselab/runner/data.hpp"
#include "sparselab/runner/training.hpp"
#include "sparselab/sparsify/masks.hpp"
#include "sparselab/sparsify/rigl.hpp"
#include "sparselab/sparsify/schedules.hpp"

namespace sparselab::runner {

namespace {

/// Share of zero mask entries over all prunable weights (0 without masks).
double mask_sparsity(const nn::ParamStore& params) {
  std::size_t zeros = 0, total = 0;
  for (const auto& e : params.entries()) {
    if (!e.info.prunable) continue;
    total += e.value.numel();
    if (e.mask)
      for (float m : e.mask->span()) zeros += m == 0.0f;
  }
  return total ? static_cast<double>(zeros) / static_cast<double>(total) : 0.0;
}

bool has_conv(const nn::ParamStore& params) {
  for (const auto& e : params.entries())
    if (e.info.prunable && e.info.layer == nn::LayerKind::kConv) return true;
  return false;
}

/// Mask bookkeeping for one method across epochs.
class Sparsifier {
 public:
  Sparsifier(const ExperimentConfig& cfg) : cfg_(cfg) {
    switch (cfg.method) {
      case Method::kGmp: gmp_ = gmp_schedule(cfg); break;
      case Method::kRigl: rigl_ = rigl_schedule(cfg); break;
      case Method::kAcdc:
        acdc_ = acdc_schedule(cfg);
        phases_ = sparsify::acdc_phases(*acdc_);
        break;
      case Method::kOneshot:
        oneshot_ = scaled_epoch(cfg.oneshot_epoch.value_or(0.5 * static_cast<double>(cfg.epochs)), cfg.multiplier);
        require(oneshot_ < cfg.total_epochs(), "oneshot_epoch must fall inside the run");
        break;
      case Method::kDense: break;
    }
  }

  std::string phase_at(std::size_t epoch) const {
    switch (cfg_.method) {
      case Method::kDense: return "dense";
      case Method::kGmp: return gmp_sparsity_at(*gmp_, static_cast<double>(epoch)) > 0.0 ? "pruning" : "dense";
      case Method::kRigl: return static_cast<double>(epoch) <= rigl_->t_end ? "rigl-update" : "rigl-fixed";
      case Method::kOneshot: return epoch < oneshot_ ? "dense" : "pruned";
      case Method::kAcdc: return sparsify::phase_name(phase_of(epoch).kind);
    }
    return "?";
  }

  const std::vector<sparsify::Phase>& phases() const { return phases_; }

  /// Applies the mask event scheduled before training epoch `epoch`.
  void before_epoch(std::size_t epoch, nn::Model& model, const Dataset& train, Rng& rng) {
    auto& params = model.params;
    const double t = static_cast<double>(epoch);
    switch (cfg_.method) {
      case Method::kDense: return;
      case Method::kGmp: {
        const double s = sparsify::gmp_sparsity_at(*gmp_, t);
        if (s != current_ && s > 0.0) sparsify::apply_magnitude_masks(params, cfg_.distribution_at(s), true);
        current_ = s;
        return;
      }
      case Method::kOneshot:
        if (epoch == oneshot_) sparsify::apply_magnitude_masks(params, cfg_.distribution_at(cfg_.target_sparsity));
        current_ = epoch >= oneshot_ ? cfg_.target_sparsity : 0.0;
        return;
      case Method::kAcdc:
        for (const auto& ph : phases_) {
          if (ph.start != epoch) continue;
          double target = cfg_.target_sparsity;
          if (acdc_->ramp) target = sparsify::progressive_target(t, *acdc_->ramp, target);
          sparsify::acdc_apply(ph.kind, params, cfg_.distribution_at(target), target,
                               std::min(acdc_->decompression_sparsity, target));
          current_ = ph.kind == sparsify::PhaseKind::kCompressed ? target : acdc_->decompression_sparsity;
        }
        return;
      case Method::kRigl:
        if (epoch == 0) {
          sparsify::apply_magnitude_masks(params, cfg_.distribution_at(cfg_.target_sparsity));
          current_ = cfg_.target_sparsity;
          return;
        }
        if (epoch % rigl_->delta_t == 0 && t <= rigl_->t_end) rigl_update(t, model, train, rng);
        return;
    }
  }

  double current_target() const { return current_; }

 private:
  const sparsify::Phase& phase_of(std::size_t epoch) const {
    for (const auto& ph : phases_)
      if (epoch >= ph.start && epoch < ph.end()) return ph;
    fail("epoch " + std::to_string(epoch) + " lies outside the AC/DC schedule");
  }

  void rigl_update(double t, nn::Model& model, const Dataset& train, Rng& rng) {
    auto& params = model.params;
    std::vector<int> labels;
    const std::size_t n = std::min(cfg_.batch_size, train.size());
    auto order = rng.permutation(train.size());
    order.resize(n);
    const Tensor batch = train.gather(order, &labels);
    const auto g = nn::grad(model, batch, labels, nn::LossConfig{cfg_.optimizer.label_smoothing});
    // Same cosine decay as rigl_fraction, before the per-layer (1 - s_l) factor.
    const double fraction = sparsify::rigl_fraction(t, rigl_->alpha, rigl_->t_end, 0.0);
    const auto dist = cfg_.distribution_at(cfg_.target_sparsity);
    const auto idx = sparsify::prunable_indices(params);
    std::vector<std::string> names;
    for (std::size_t i : idx) names.push_back(params[i].info.name);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto& e = params[idx[k]];
      if (sparsify::is_exempt(dist, names, k) || !e.mask) continue;
      auto up = sparsify::rigl_step(e.value, g.grads[idx[k]], *e.mask, fraction);
      params.set_mask(idx[k], std::move(up.mask));
    }
  }

  const ExperimentConfig& cfg_;
  std::optional<sparsify::GmpSchedule> gmp_;
  std::optional<sparsify::RiglSchedule> rigl_;
  std::optional<sparsify::AcdcSchedule> acdc_;
  std::vector<sparsify::Phase> phases_;
  std::size_t oneshot_ = 0;
  double current_ = 0.0;
};

diag::MetricRow make_row(std::size_t epoch, const std::string& split, const diag::LogitSummary& s,
                         double train_loss, const nn::ParamStore& params) {
  diag::MetricRow r;
  r.epoch = epoch;
  r.split = split;
  r.top1 = s.top1;
  r.mean_entropy = s.mean_entropy;
  r.mean_ce = s.mean_ce;
  r.uncertainty_fraction = s.uncertainty;
  r.train_loss = train_loss;
  r.sparsity = mask_sparsity(params);
  if (has_conv(params)) r.channel_sparsity_avg = diag::channel_sparsity(params).global();
  r.flops_proportion = diag::flops(params).proportion;
  return r;
}

}  // namespace

std::vector<std::size_t> checkpoint_epochs(const ExperimentConfig& cfg) {
  std::set<std::size_t> out;
  if (!cfg.checkpoint.enabled) return {};
  const std::size_t total = cfg.total_epochs();
  if (cfg.checkpoint.align == "acdc-phases" && cfg.method == Method::kAcdc) {
    for (const auto& ph : sparsify::acdc_phases(acdc_schedule(cfg))) out.insert(ph.end() - 1);
  } else {
    for (std::size_t e = 0; e < total; ++e)
      if ((e + 1) % cfg.checkpoint.every == 0) out.insert(e);
  }
  return {out.begin(), out.end()};
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const bool write = !out_dir.empty();
  const Json resolved = to_json(cfg);
  if (write) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir + "/config.resolved.json", resolved.dump(2) + "\n");
  }

  const DataSplits data = make_dataset(cfg.dataset);
  require(data.train.classes == cfg.model.num_classes(), "dataset classes do not match the model");
  Rng init = Rng::substream(cfg.seed, Stream::kInit);
  RunResult res{{}, {}, nn::make_model(cfg.model, init)};
  nn::Model& model = res.model;

  const std::size_t total = cfg.total_epochs();
  const std::size_t steps = steps_per_epoch(data.train.size(), cfg.batch_size);
  optim::LrSchedule lr;
  lr.kind = cfg.optimizer.schedule;
  lr.peak = cfg.optimizer.peak_lr;
  lr.total_steps = total * steps;
  lr.warmup_end = std::min<std::size_t>(
      lr.total_steps,
      static_cast<std::size_t>(std::llround(cfg.optimizer.warmup_epochs * cfg.multiplier * static_cast<double>(steps))));
  optim::SgdState state = make_sgd_state(model.params, {cfg.optimizer.momentum, cfg.optimizer.weight_decay}, lr);

  Rng shuffle = Rng::substream(cfg.seed, Stream::kShuffle);
  Rng dropout = Rng::substream(cfg.seed, Stream::kDropout);
  EpochArgs args{cfg.batch_size, nn::LossConfig{cfg.optimizer.label_smoothing}, &shuffle, &dropout};
  Sparsifier sparsifier(cfg);
  const auto ckpt_at = checkpoint_epochs(cfg);

  auto metadata = [&](std::size_t epoch, const std::string& phase, double train_loss, double val_loss) {
    Json m;
    m["epoch"] = epoch;
    m["seed"] = cfg.seed;
    m["method"] = method_name(cfg.method);
    m["schedule_state"] = {{"phase", phase}, {"target_sparsity", sparsifier.current_target()},
                           {"mask_sparsity", mask_sparsity(model.params)}};
    m["train_loss"] = train_loss;
    m["val_loss"] = val_loss;
    m["model"] = to_json(cfg.model);
    m["config"] = resolved;
    return m;
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < total; ++epoch) {
    const std::string phase = sparsifier.phase_at(epoch);
    try {
      const auto before = optim::snapshot_masks(model.params);
      sparsifier.before_epoch(epoch, model, data.train, shuffle);
      optim::reset_momentum(state, optim::diff_masks(before, optim::snapshot_masks(model.params)));

      const std::size_t first = step;
      const double train_loss =
          train_epoch(model, state, data.train, args, [&](std::size_t i) { return lr_at(state.schedule, first + i); });
      step += steps;

      const auto val = evaluate(model, data.val, cfg.eval_batch_size);
      if (cfg.diagnostics.train_metrics)
        res.rows.push_back(make_row(epoch, "train", evaluate(model, data.train, cfg.eval_batch_size), train_loss,
                                    model.params));
      res.rows.push_back(make_row(epoch, "val", val, train_loss, model.params));
      if (cfg.verbose)
        std::fprintf(stderr, "epoch %zu [%s] train_loss %.4f val_ce %.4f val_top1 %.4f sparsity %.4f\n", epoch,
                     phase.c_str(), train_loss, val.mean_ce, val.top1, res.rows.back().sparsity);
      if (write) {
        write_file_atomic(out_dir + "/metrics.csv", metrics_csv(res.rows));
        if (std::binary_search(ckpt_at.begin(), ckpt_at.end(), epoch)) {
          const std::string path = out_dir + "/" + checkpoint_filename(epoch);
          save_checkpoint(path, capture(model, &state, metadata(epoch, phase, train_loss, val.mean_ce)));
          res.checkpoints.push_back(path);
        }
        if (epoch + 1 == total)
          save_checkpoint(out_dir + "/final.splb",
                          capture(model, &state, metadata(epoch, phase, train_loss, val.mean_ce)));
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("epoch " + std::to_string(epoch) + " (phase " + phase + "): " + e.what());
    }
  }
  return res;
}

}  // namespace sparselab::runner
