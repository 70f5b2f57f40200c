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

#include "sparselab/transfer/transfer.hpp"

#include <algorithm>

#include "sparselab/core/error.hpp"
#include "sparselab/optim/sgd.hpp"
#include "sparselab/runner/training.hpp"

namespace sparselab::transfer {

std::string param_class_name(ParamClass c) {
  switch (c) {
    case ParamClass::kSparseLinearWeight: return "sparse-linear-weight";
    case ParamClass::kBias: return "bias";
    case ParamClass::kNorm: return "norm-param";
    case ParamClass::kHead: return "head-param";
    case ParamClass::kEmbedding: return "embedding";
  }
  return "?";
}

namespace {

ParamClass classify(const nn::ParamInfo& p) {
  if (p.is_head) return ParamClass::kHead;
  switch (p.role) {
    case nn::ParamRole::kWeight: return ParamClass::kSparseLinearWeight;
    case nn::ParamRole::kBias: return ParamClass::kBias;
    case nn::ParamRole::kNorm: return ParamClass::kNorm;
    case nn::ParamRole::kEmbedding: return ParamClass::kEmbedding;
  }
  return ParamClass::kBias;
}

/// Layer prefix of an MLP/CNN parameter ("fc0.weight" -> "fc0").
std::string layer_of(const std::string& name) { return name.substr(0, name.find('.')); }

}  // namespace

LayerGroups layer_groups(const nn::ModelSpec& spec) {
  const auto params = nn::describe_params(spec);
  LayerGroups g;
  g.groups.push_back({"stem", {}});
  std::vector<LayerGroup> blocks;
  LayerGroup head{"head", {}};
  const bool transformer = spec.kind() == nn::Architecture::kTinyTransformer;
  for (const auto& p : params) {
    g.classes[p.name] = classify(p);
    if (p.is_head) {
      head.params.push_back(p.name);
    } else if (transformer) {
      if (p.role == nn::ParamRole::kEmbedding) {
        g.groups[0].params.push_back(p.name);
      } else if (p.block >= 0) {
        const auto b = static_cast<std::size_t>(p.block);
        if (blocks.size() <= b) blocks.resize(b + 1);
        blocks[b].name = "block_" + std::to_string(b + 1);
        blocks[b].params.push_back(p.name);
      } else {
        head.params.push_back(p.name);  // final norm feeds the head directly
      }
    } else {
      const std::string layer = layer_of(p.name);
      if (blocks.empty() || blocks.back().name != layer) blocks.push_back({layer, {}});
      blocks.back().params.push_back(p.name);
    }
  }
  for (auto& b : blocks) g.groups.push_back(std::move(b));
  g.groups.push_back(std::move(head));
  return g;
}

std::set<std::string> trainable_set(const LayerGroups& groups, std::size_t stage) {
  const std::size_t b = groups.blocks();
  if (stage > b + 1) fail("trainable_set: stage " + std::to_string(stage) + " out of range [0, " +
                          std::to_string(b + 1) + "]");
  std::set<std::string> out;
  for (const auto& [name, cls] : groups.classes) {
    if (stage == b + 1 || cls == ParamClass::kHead || cls == ParamClass::kBias || cls == ParamClass::kNorm)
      out.insert(name);
  }
  if (stage == b + 1) return out;
  // groups[1..B] are blocks in front-to-back order; unfreeze from the back.
  for (std::size_t k = 0; k < stage; ++k)
    for (const auto& name : groups.groups[b - k].params)
      if (groups.classes.at(name) == ParamClass::kSparseLinearWeight) out.insert(name);
  return out;
}

nn::Model attach_head(const nn::Model& pretrained, std::size_t classes, std::uint64_t seed) {
  nn::ModelSpec spec = pretrained.spec;
  std::visit([&](auto& s) {
    using S = std::decay_t<decltype(s)>;
    if constexpr (std::is_same_v<S, nn::MlpSpec>) s.dims.back() = classes;
    else s.classes = classes;
  }, spec.arch);
  Rng rng = Rng::substream(seed, Stream::kHead);
  nn::Model m = nn::make_model(spec, rng);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    auto& dst = m.params[i];
    if (dst.info.is_head) continue;
    const auto& src = pretrained.params.at(dst.info.name);
    dst.value = src.value;
    dst.mask = src.mask;
  }
  return m;
}

double rewound_lr(double lr0, std::size_t step, std::size_t steps) {
  require(step < steps, "rewound_lr: step outside the stage");
  if (steps == 1) return lr0;
  return lr0 * static_cast<double>(steps - 1 - step) / static_cast<double>(steps - 1);
}

namespace {

struct Trainer {
  const runner::DataSplits& task;
  const TransferHyper& hyper;
  Rng shuffle;
  Rng dropout;

  Trainer(const runner::DataSplits& t, const TransferHyper& h)
      : task(t), hyper(h), shuffle(Rng::substream(h.seed, Stream::kShuffle)),
        dropout(Rng::substream(h.seed, Stream::kDropout)) {}

  runner::EpochArgs args() {
    return {hyper.batch_size, nn::LossConfig{hyper.label_smoothing}, &shuffle, &dropout};
  }

  optim::SgdState fresh_state(const nn::Model& m) const {
    return optim::make_sgd_state(m.params, {hyper.momentum, hyper.weight_decay}, {});
  }
};

std::vector<std::optional<Tensor>> masks_of(const nn::ParamStore& p) { return optim::snapshot_masks(p); }

bool same_masks(const std::vector<std::optional<Tensor>>& a, const std::vector<std::optional<Tensor>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].has_value() != b[i].has_value()) return false;
    if (a[i] && !bit_identical(*a[i], *b[i])) return false;
  }
  return true;
}

}  // namespace

TransferResult transfer_run(nn::Model model, const runner::DataSplits& task, const TransferHyper& hyper) {
  require(task.train.classes == model.spec.num_classes(), "transfer: head does not match the task classes");
  const LayerGroups groups = layer_groups(model.spec);
  const auto initial_masks = masks_of(model.params);
  Trainer tr(task, hyper);
  const std::size_t steps = runner::steps_per_epoch(task.train.size(), hyper.batch_size);

  TransferResult res{model, {}, false};
  double best_top1 = -1.0, best_loss = 0.0;
  std::size_t since_best = 0;
  const std::size_t stages = hyper.max_stages ? std::min(hyper.max_stages, groups.stages()) : groups.stages();
  for (std::size_t stage = 0; stage < stages; ++stage) {
    const auto allowed = trainable_set(groups, stage);
    StageRecord rec;
    rec.stage = stage;
    for (auto& e : model.params.entries()) {
      e.trainable = allowed.count(e.info.name) > 0;
      if (e.trainable) rec.trainable_params += e.value.numel();
    }
    const nn::ParamStore before = model.params;
    optim::SgdState state = tr.fresh_state(model);
    rec.lr_first = rewound_lr(hyper.lr, 0, steps);
    rec.lr_last = rewound_lr(hyper.lr, steps - 1, steps);
    rec.train_loss = runner::train_epoch(model, state, task.train, tr.args(),
                                         [&](std::size_t i) { return rewound_lr(hyper.lr, i, steps); });

    if (!same_masks(initial_masks, masks_of(model.params)))
      fail("transfer: mask mutation detected in stage " + std::to_string(stage));
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      const auto& e = model.params[i];
      if (bit_identical(e.value, before[i].value)) continue;
      if (!allowed.count(e.info.name))
        fail("transfer: frozen parameter '" + e.info.name + "' changed in stage " + std::to_string(stage));
      rec.changed.push_back(e.info.name);
    }

    const auto val = runner::evaluate(model, task.val, hyper.eval_batch_size);
    rec.val_loss = val.mean_ce;
    rec.val_top1 = val.top1;
    const bool improved = val.top1 > best_top1 || (val.top1 == best_top1 && val.mean_ce < best_loss);
    if (improved) {
      best_top1 = val.top1;
      best_loss = val.mean_ce;
      since_best = 0;
      res.model = model;
      for (auto& r : res.stages) r.best = false;
      rec.best = true;
    } else {
      ++since_best;
    }
    res.stages.push_back(std::move(rec));
    if (hyper.early_stopping && since_best >= hyper.patience && stage + 1 < stages) {
      res.stopped_early = true;
      break;
    }
  }
  if (!hyper.early_stopping) {
    res.model = model;
    for (auto& r : res.stages) r.best = false;
    res.stages.back().best = true;
  }
  for (auto& e : res.model.params.entries()) e.trainable = true;
  return res;
}

RecipeResult baseline_recipe(nn::Model model, const runner::DataSplits& task, RecipeMode mode, Finetune finetune,
                             std::size_t epochs, const TransferHyper& hyper) {
  require(task.train.classes == model.spec.num_classes(), "transfer: head does not match the task classes");
  if (mode == RecipeMode::kDenseRecipe) epochs = 3;
  require(epochs > 0, "baseline recipe needs at least one epoch");
  for (auto& e : model.params.entries()) e.trainable = finetune == Finetune::kFull || e.info.is_head;
  Trainer tr(task, hyper);
  const std::size_t steps = runner::steps_per_epoch(task.train.size(), hyper.batch_size);
  optim::LrSchedule lr;
  lr.kind = optim::LrKind::kLinearWarmupLinearDecay;
  lr.peak = hyper.lr;
  lr.warmup_end = 0;
  lr.total_steps = epochs * steps;
  optim::SgdState state = optim::make_sgd_state(model.params, {hyper.momentum, hyper.weight_decay}, lr);
  RecipeResult res{model, {}};
  std::size_t step = 0;
  for (std::size_t ep = 0; ep < epochs; ++ep) {
    const std::size_t first = step;
    EpochRecord r;
    r.epoch = ep;
    r.train_loss = runner::train_epoch(model, state, task.train, tr.args(),
                                       [&](std::size_t i) { return optim::lr_at(lr, first + i); });
    step += steps;
    r.total_steps = step;
    const auto val = runner::evaluate(model, task.val, hyper.eval_batch_size);
    r.val_loss = val.mean_ce;
    r.val_top1 = val.top1;
    res.epochs.push_back(r);
  }
  for (auto& e : model.params.entries()) e.trainable = true;
  res.model = std::move(model);
  return res;
}

std::vector<EpochRecord> rescaled_sweep(const nn::Model& model, const runner::DataSplits& task,
                                        const std::vector<std::size_t>& epoch_list, Finetune finetune,
                                        const TransferHyper& hyper) {
  std::vector<EpochRecord> out;
  for (std::size_t e : epoch_list)
    out.push_back(baseline_recipe(model, task, RecipeMode::kRescaled, finetune, e, hyper).epochs.back());
  return out;
}

std::string stages_csv(const std::vector<StageRecord>& stages) {
  using runner::format_number;
  std::string out = "stage,trainable_params,lr_first,lr_last,train_loss,val_loss,val_top1,best\n";
  for (const auto& s : stages)
    out += std::to_string(s.stage) + ',' + std::to_string(s.trainable_params) + ',' + format_number(s.lr_first) +
           ',' + format_number(s.lr_last) + ',' + format_number(s.train_loss) + ',' + format_number(s.val_loss) +
           ',' + format_number(s.val_top1) + ',' + (s.best ? "1" : "0") + '\n';
  return out;
}

std::string epochs_csv(const std::vector<EpochRecord>& epochs) {
  using runner::format_number;
  std::string out = "epoch,total_steps,train_loss,val_loss,val_top1\n";
  for (const auto& e : epochs)
    out += std::to_string(e.epoch) + ',' + std::to_string(e.total_steps) + ',' + format_number(e.train_loss) + ',' +
           format_number(e.val_loss) + ',' + format_number(e.val_top1) + '\n';
  return out;
}

}  // namespace sparselab::transfer
