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

#include "sparselab/runner/jobs.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include "reader.hpp"
#include "sparselab/core/error.hpp"
#include "sparselab/runner/checkpoint.hpp"
#include "sparselab/runner/data.hpp"
#include "sparselab/runner/experiment.hpp"
#include "sparselab/runner/training.hpp"

namespace sparselab::runner {

using detail::check;
using detail::Reader;

namespace {

std::string recipe_name(TransferRecipe r) {
  switch (r) {
    case TransferRecipe::kGradual: return "gradual";
    case TransferRecipe::kDenseRecipe: return "dense-recipe";
    case TransferRecipe::kRescaled: return "rescaled";
  }
  return "?";
}

}  // namespace

TransferJob parse_transfer_job(const Json& j) {
  Reader r(j, "transfer");
  TransferJob t;
  t.checkpoint = r.get<std::string>("checkpoint", "");
  const Json* task = r.child("task");
  if (!task) throw ConfigError("transfer: missing 'task'");
  t.task = parse_dataset(*task);
  const auto recipe = r.get<std::string>("recipe", "gradual");
  if (recipe == "gradual") t.recipe = TransferRecipe::kGradual;
  else if (recipe == "dense-recipe") t.recipe = TransferRecipe::kDenseRecipe;
  else if (recipe == "rescaled") t.recipe = TransferRecipe::kRescaled;
  else throw ConfigError("transfer.recipe: expected gradual, dense-recipe or rescaled");
  const auto ft = r.get<std::string>("finetune", "full");
  if (ft == "full") t.finetune = transfer::Finetune::kFull;
  else if (ft == "linear") t.finetune = transfer::Finetune::kLinear;
  else throw ConfigError("transfer.finetune: expected full or linear");
  t.epochs = r.get("epochs", t.epochs);
  auto& h = t.hyper;
  h.lr = r.get("lr", h.lr);
  h.batch_size = r.get("batch_size", h.batch_size);
  h.eval_batch_size = r.get("eval_batch_size", h.eval_batch_size);
  h.momentum = r.get("momentum", h.momentum);
  h.weight_decay = r.get("weight_decay", h.weight_decay);
  h.label_smoothing = r.get("label_smoothing", h.label_smoothing);
  h.early_stopping = r.get("early_stopping", h.early_stopping);
  h.patience = r.get("patience", h.patience);
  h.seed = r.get("seed", h.seed);
  t.dropout = r.opt<double>("dropout");
  r.done();
  check(h.lr >= 0.0, "transfer.lr must be non-negative");
  check(h.batch_size > 0 && h.eval_batch_size > 0, "transfer: batch sizes must be positive");
  check(h.momentum >= 0.0 && h.momentum < 1.0, "transfer.momentum must lie in [0, 1)");
  check(h.weight_decay >= 0.0, "transfer.weight_decay must be non-negative");
  check(h.label_smoothing >= 0.0 && h.label_smoothing < 1.0, "transfer.label_smoothing must lie in [0, 1)");
  check(h.patience > 0, "transfer.patience must be positive");
  check(!t.epochs.empty(), "transfer.epochs must not be empty");
  for (auto e : t.epochs) check(e > 0, "transfer.epochs entries must be positive");
  check(!t.dropout || (*t.dropout >= 0.0 && *t.dropout < 1.0), "transfer.dropout must lie in [0, 1)");
  return t;
}

Json to_json(const TransferJob& t) {
  Json j;
  j["checkpoint"] = t.checkpoint;
  j["task"] = to_json(t.task);
  j["recipe"] = recipe_name(t.recipe);
  j["finetune"] = t.finetune == transfer::Finetune::kFull ? "full" : "linear";
  j["epochs"] = t.epochs;
  j["lr"] = t.hyper.lr;
  j["batch_size"] = t.hyper.batch_size;
  j["eval_batch_size"] = t.hyper.eval_batch_size;
  j["momentum"] = t.hyper.momentum;
  j["weight_decay"] = t.hyper.weight_decay;
  j["label_smoothing"] = t.hyper.label_smoothing;
  j["early_stopping"] = t.hyper.early_stopping;
  j["patience"] = t.hyper.patience;
  j["seed"] = t.hyper.seed;
  j["dropout"] = t.dropout ? Json(*t.dropout) : Json(nullptr);
  return j;
}

JobOutcome run_transfer_job(const TransferJob& job, const std::string& out_dir) {
  if (job.checkpoint.empty()) throw ConfigError("transfer: no checkpoint given");
  const Checkpoint ck = load_checkpoint(job.checkpoint);
  nn::Model pretrained = restore_model(ck);
  if (job.dropout) {
    auto* ts = std::get_if<nn::TransformerSpec>(&pretrained.spec.arch);
    if (!ts) throw ConfigError("transfer.dropout applies to the tiny-transformer only");
    ts->dropout = *job.dropout;
  }
  const DataSplits task = make_dataset(job.task);
  if (!pretrained.spec.accepts_width(task.train.width()))
    throw ConfigError("transfer: task inputs do not fit the pretrained model");
  nn::Model model = transfer::attach_head(pretrained, task.train.classes, job.hyper.seed);

  JobOutcome out;
  if (job.recipe == TransferRecipe::kGradual) {
    const auto res = transfer::transfer_run(std::move(model), task, job.hyper);
    out.csv = transfer::stages_csv(res.stages);
    for (const auto& s : res.stages) out.score = std::max(out.score, s.val_top1);
  } else if (job.recipe == TransferRecipe::kDenseRecipe) {
    const auto res = transfer::baseline_recipe(std::move(model), task, transfer::RecipeMode::kDenseRecipe,
                                               job.finetune, 3, job.hyper);
    out.csv = transfer::epochs_csv(res.epochs);
    out.score = res.epochs.back().val_top1;
  } else {
    const auto rows = transfer::rescaled_sweep(model, task, job.epochs, job.finetune, job.hyper);
    out.csv = transfer::epochs_csv(rows);
    for (const auto& r : rows) out.score = std::max(out.score, r.val_top1);
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir + "/transfer.resolved.json", to_json(job).dump(2) + "\n");
    write_file_atomic(out_dir + (job.recipe == TransferRecipe::kGradual ? "/stages.csv" : "/epochs.csv"), out.csv);
  }
  return out;
}

SweepSpec parse_sweep(const Json& j) {
  Reader r(j, "sweep");
  SweepSpec s;
  const Json* base = r.child("base");
  const Json* tr = r.child("transfer");
  if ((base == nullptr) == (tr == nullptr)) throw ConfigError("sweep: give exactly one of 'base' or 'transfer'");
  s.transfer = tr != nullptr;
  s.base = s.transfer ? *tr : *base;
  const Json* grid = r.child("grid");
  if (!grid || !grid->is_object() || grid->empty()) throw ConfigError("sweep: 'grid' must be a non-empty object");
  for (const auto& [key, values] : grid->items()) {
    if (!values.is_array() || values.empty()) throw ConfigError("sweep.grid." + key + ": expected a non-empty list");
    s.grid.emplace_back(key, std::vector<Json>(values.begin(), values.end()));
  }
  r.done();
  for (const auto& point : expand_grid(s)) {
    if (s.transfer) (void)parse_transfer_job(point);
    else (void)parse_experiment(point);
  }
  return s;
}

namespace {

void set_path(Json& root, const std::string& dotted, const Json& value) {
  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("sweep: malformed path '" + dotted + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = Json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("sweep: '" + dotted + "' crosses a non-object value");
    start = dot + 1;
  }
}

Json overrides_at(const SweepSpec& spec, std::size_t flat) {
  Json o = Json::object();
  std::vector<std::size_t> digits(spec.grid.size());
  for (std::size_t k = spec.grid.size(); k-- > 0;) {
    digits[k] = flat % spec.grid[k].second.size();
    flat /= spec.grid[k].second.size();
  }
  for (std::size_t k = 0; k < spec.grid.size(); ++k) o[spec.grid[k].first] = spec.grid[k].second[digits[k]];
  return o;
}

std::size_t grid_size(const SweepSpec& spec) {
  std::size_t n = 1;
  for (const auto& g : spec.grid) n *= g.second.size();
  return n;
}

Json apply_overrides(const SweepSpec& spec, const Json& overrides) {
  Json point = spec.base;
  for (const auto& [k, v] : overrides.items()) set_path(point, k, v);
  return point;
}

}  // namespace

std::vector<Json> expand_grid(const SweepSpec& spec) {
  std::vector<Json> out;
  for (std::size_t i = 0; i < grid_size(spec); ++i) out.push_back(apply_overrides(spec, overrides_at(spec, i)));
  return out;
}

double mean_of_best_two(std::vector<double> scores) {
  require(!scores.empty(), "no scores to summarize");
  std::sort(scores.begin(), scores.end(), std::greater<>());
  if (scores.size() == 1) return scores[0];
  return (scores[0] + scores[1]) / 2.0;
}

std::size_t sweep_threads_from_env() {
  const char* v = std::getenv("SPARSELAB_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("SPARSELAB_THREADS must be a positive integer");
  return static_cast<std::size_t>(n);
}

SweepSummary run_sweep(const SweepSpec& spec, const std::string& out_dir, std::size_t threads) {
  const std::size_t n = grid_size(spec);
  SweepSummary sum;
  sum.runs.resize(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      char dir[32];
      std::snprintf(dir, sizeof dir, "run_%03zu", i);
      const std::string run_dir = out_dir.empty() ? "" : out_dir + "/" + dir;
      SweepRun& run = sum.runs[i];
      run.index = i;
      run.overrides = overrides_at(spec, i);
      try {
        const Json point = apply_overrides(spec, run.overrides);
        if (spec.transfer) {
          run.score = run_transfer_job(parse_transfer_job(point), run_dir).score;
        } else {
          const auto res = run_experiment(parse_experiment(point), run_dir);
          run.score = res.rows.back().top1;
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) fail("sweep run " + std::to_string(i) + ": " + errors[i]);

  std::vector<double> scores;
  for (const auto& r : sum.runs) scores.push_back(r.score);
  sum.best_two_mean = mean_of_best_two(scores);

  if (!out_dir.empty()) {
    std::string csv = "run";
    for (const auto& g : spec.grid) csv += "," + g.first;
    csv += ",score\n";
    Json runs = Json::array();
    for (const auto& r : sum.runs) {
      csv += std::to_string(r.index);
      for (const auto& g : spec.grid) csv += "," + r.overrides.at(g.first).dump();
      csv += "," + format_number(r.score) + "\n";
      runs.push_back({{"run", r.index}, {"overrides", r.overrides}, {"score", r.score}});
    }
    write_file_atomic(out_dir + "/summary.csv", csv);
    write_file_atomic(out_dir + "/summary.json",
                      Json{{"runs", runs}, {"best_two_mean", sum.best_two_mean}}.dump(2) + "\n");
  }
  return sum;
}

}  // namespace sparselab::runner
