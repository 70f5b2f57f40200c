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

#include "sparselab/runner/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "sparselab/core/error.hpp"
#include "sparselab/diagnostics/metrics.hpp"
#include "sparselab/landscape/landscape.hpp"
#include "sparselab/runner/checkpoint.hpp"
#include "sparselab/runner/data.hpp"
#include "sparselab/runner/experiment.hpp"
#include "sparselab/runner/jobs.hpp"
#include "sparselab/runner/training.hpp"
#include "sparselab/sparsify/masks.hpp"

namespace sparselab::runner {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> checkpoint_every;
  std::string checkpoint;
  std::string dir;
  std::vector<std::string> checkpoints;
  std::size_t segments = 10;
  bool masks = false;
  std::size_t iters = 20;
  std::size_t batch = 512;
  bool dense = false;
};

/// Writes `text` to `out_dir/name`, or to the stream when no directory is set.
void emit(const Options& o, const std::string& name, const std::string& text, std::ostream& out) {
  if (o.out.empty()) {
    out << text;
    return;
  }
  std::filesystem::create_directories(o.out);
  write_file_atomic(o.out + "/" + name, text);
}

int cmd_train(const Options& o, std::ostream& out) {
  Json j = read_json_file(o.config);
  if (o.seed) j["seed"] = *o.seed;
  if (o.checkpoint_every) j["checkpoint"]["every"] = *o.checkpoint_every;
  const ExperimentConfig cfg = parse_experiment(j);
  if (o.out.empty()) throw ConfigError("train: --out is required");
  const auto res = run_experiment(cfg, o.out);
  const auto& last = res.rows.back();
  out << "epochs " << cfg.total_epochs() << "  val_top1 " << format_number(last.top1) << "  sparsity "
      << format_number(last.sparsity) << "  checkpoints " << res.checkpoints.size() << "\n";
  return 0;
}

int cmd_analyze_masks(const Options& o, std::ostream& out) {
  const auto paths = list_checkpoints(o.dir);
  std::string csv = "from_epoch,to_epoch,iou,channel_sparsity_avg,zero_fraction\n";
  std::optional<nn::Model> prev;
  std::size_t prev_epoch = 0;
  for (const auto& p : paths) {
    const Checkpoint ck = load_checkpoint(p);
    nn::Model m = restore_model(ck);
    const std::size_t epoch = ck.metadata.at("epoch").get<std::size_t>();
    if (prev) {
      const auto a = diag::prunable_weights(prev->params);
      const auto b = diag::prunable_weights(m.params);
      const auto cs = diag::channel_sparsity(m.params);
      csv += std::to_string(prev_epoch) + "," + std::to_string(epoch) + "," + format_number(diag::mask_iou(a, b)) +
             "," + (cs.channels ? format_number(cs.global()) : std::string()) + "," +
             format_number(sparsify::zero_fraction(m.params)) + "\n";
    }
    prev = std::move(m);
    prev_epoch = epoch;
  }
  emit(o, "masks.csv", csv, out);
  return 0;
}

int cmd_sharpness(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const nn::Model model = restore_model(ck);
  const ExperimentConfig cfg = checkpoint_config(ck);
  const DataSplits data = make_dataset(cfg.dataset);
  landscape::SharpnessConfig sc;
  sc.power_iters = o.iters;
  sc.batch_size = o.batch;
  sc.restrict_to_mask = !o.dense;
  sc.seed = o.seed.value_or(cfg.seed);
  const auto r = landscape::sharpness(model, data.train.inputs, data.train.labels, sc);
  std::string csv = "iteration,rayleigh\n";
  for (std::size_t i = 0; i < r.rayleigh.size(); ++i) csv += std::to_string(i) + "," + format_number(r.rayleigh[i]) + "\n";
  emit(o, "sharpness.csv", csv, out);
  out << "sharpness " << format_number(r.value) << (r.degenerate ? " (degenerate)" : "") << "\n";
  return 0;
}

int cmd_interpolate(const Options& o, std::ostream& out) {
  std::vector<std::string> paths = o.checkpoints;
  if (!o.dir.empty()) {
    const auto found = list_checkpoints(o.dir);
    paths.insert(paths.end(), found.begin(), found.end());
  }
  if (paths.size() < 2) throw ConfigError("interpolate: need at least two checkpoints");
  std::vector<nn::ParamStore> stores;
  std::optional<nn::ModelSpec> spec;
  std::optional<ExperimentConfig> cfg;
  for (const auto& p : paths) {
    const Checkpoint ck = load_checkpoint(p);
    nn::Model m = restore_model(ck);
    if (!cfg) {
      cfg = checkpoint_config(ck);
      spec = m.spec;
    }
    stores.push_back(std::move(m.params));
  }
  const DataSplits data = make_dataset(cfg->dataset);
  const std::size_t eval_batch = cfg->eval_batch_size;
  auto loss_on = [&](const Dataset& d) {
    return [&, spec = *spec](const nn::ParamStore& p) { return evaluate(nn::Model{spec, p}, d, eval_batch).mean_ce; };
  };
  const auto rows =
      landscape::interpolate_path(stores, o.segments, {{"train", loss_on(data.train)}, {"val", loss_on(data.val)}}, o.masks);
  std::string csv = "alpha,split,loss\n";
  for (const auto& r : rows) csv += format_number(r.alpha) + "," + r.split + "," + format_number(r.loss) + "\n";
  emit(o, "interpolation.csv", csv, out);
  return 0;
}

int cmd_transfer(const Options& o, std::ostream& out) {
  Json j = read_json_file(o.config);
  if (!o.checkpoint.empty()) j["checkpoint"] = o.checkpoint;
  if (o.seed) j["seed"] = *o.seed;
  const TransferJob job = parse_transfer_job(j);
  if (o.out.empty()) throw ConfigError("transfer: --out is required");
  const auto r = run_transfer_job(job, o.out);
  out << "best val_top1 " << format_number(r.score) << "\n";
  return 0;
}

int cmd_flops(const Options& o, std::ostream& out) {
  nn::Model model;
  if (!o.checkpoint.empty()) {
    model = restore_model(load_checkpoint(o.checkpoint));
  } else if (!o.config.empty()) {
    const ExperimentConfig cfg = parse_experiment(read_json_file(o.config));
    Rng init = Rng::substream(cfg.seed, Stream::kInit);
    model = nn::make_model(cfg.model, init);
  } else {
    throw ConfigError("flops: give --checkpoint or --config");
  }
  const auto r = diag::flops(model.params);
  emit(o, "flops.csv",
       "dense_flops,sparse_flops,proportion\n" + format_number(r.dense) + "," + format_number(r.dense * r.proportion) +
           "," + format_number(r.proportion) + "\n",
       out);
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const SweepSpec spec = parse_sweep(read_json_file(o.config));
  if (o.out.empty()) throw ConfigError("sweep: --out is required");
  const auto s = run_sweep(spec, o.out, sweep_threads_from_env());
  out << "runs " << s.runs.size() << "  best_two_mean " << format_number(s.best_two_mean) << "\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deterministic sparse-training laboratory", "sparselab"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c, bool config_required) {
    auto* cfg = c->add_option("--config", o.config, "Config file (JSON)");
    if (config_required) cfg->required()->check(CLI::ExistingFile);
    c->add_option("--out", o.out, "Output directory");
    c->add_option("--seed", o.seed, "Seed override");
    c->add_option("--checkpoint-every", o.checkpoint_every, "Checkpoint cadence in epochs")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "Run an experiment");
  common(train, true);
  auto* masks = app.add_subcommand("analyze-masks", "Consecutive-checkpoint mask IoU and channel sparsity");
  common(masks, false);
  masks->add_option("--dir", o.dir, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  auto* sharp = app.add_subcommand("sharpness", "Top Hessian eigenvalue by power iteration");
  common(sharp, false);
  sharp->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  sharp->add_option("--iters", o.iters, "Power iterations")->check(CLI::PositiveNumber);
  sharp->add_option("--batch", o.batch, "Examples in the loss batch")->check(CLI::PositiveNumber);
  sharp->add_flag("--dense", o.dense, "Do not restrict to the mask support");
  auto* interp = app.add_subcommand("interpolate", "Losses along the piecewise-linear checkpoint path");
  common(interp, false);
  interp->add_option("--checkpoints", o.checkpoints, "Checkpoints in path order");
  interp->add_option("--dir", o.dir, "Directory of checkpoints (epoch order)");
  interp->add_option("--segments", o.segments, "Pieces per interval")->check(CLI::PositiveNumber);
  interp->add_flag("--masks", o.masks, "Apply the union mask at blended points");
  auto* tr = app.add_subcommand("transfer", "Finetune a sparse checkpoint on a task");
  common(tr, true);
  tr->add_option("--checkpoint", o.checkpoint)->check(CLI::ExistingFile);
  auto* fl = app.add_subcommand("flops", "Inference FLOPs report");
  common(fl, false);
  fl->add_option("--checkpoint", o.checkpoint)->check(CLI::ExistingFile);
  auto* sw = app.add_subcommand("sweep", "Grid of runs with a best-two summary");
  common(sw, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "sparselab: " << e.what() << "\n";
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(o, out);
    if (masks->parsed()) return cmd_analyze_masks(o, out);
    if (sharp->parsed()) return cmd_sharpness(o, out);
    if (interp->parsed()) return cmd_interpolate(o, out);
    if (tr->parsed()) return cmd_transfer(o, out);
    if (fl->parsed()) return cmd_flops(o, out);
    if (sw->parsed()) return cmd_sweep(o, out);
  } catch (const ConfigError& e) {
    err << "sparselab: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "sparselab: " << e.what() << "\n";
    return 1;
  }
  err << "sparselab: no subcommand\n";
  return 2;
}

}  // namespace sparselab::runner
