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

#include "sparselab/runner/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sparselab/core/error.hpp"
#include "reader.hpp"

namespace sparselab::runner {

namespace {

using detail::Reader;
using detail::check;

template <class T>
Json opt_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::kIdx: return "idx-images";
    case DatasetKind::kBlobs: return "synthetic-blobs";
    case DatasetKind::kSequences: return "synthetic-sequences";
  }
  return "?";
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kDense: return "dense";
    case Method::kGmp: return "gmp";
    case Method::kRigl: return "rigl";
    case Method::kAcdc: return "acdc";
    case Method::kOneshot: return "oneshot";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kDense, Method::kGmp, Method::kRigl, Method::kAcdc, Method::kOneshot})
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method '" + name + "'");
}

std::size_t ExperimentConfig::total_epochs() const { return scaled_epoch(static_cast<double>(epochs), multiplier); }

sparsify::SparsityDistribution ExperimentConfig::distribution_at(double target) const {
  return {distribution, target, keep_dense};
}

std::size_t scaled_epoch(double base_epochs, double multiplier) {
  const double v = base_epochs * multiplier;
  return static_cast<std::size_t>(std::llround(v));
}

nn::ModelSpec parse_model(const Json& j) {
  Reader r(j, "model");
  const auto arch = r.need<std::string>("arch");
  nn::ModelSpec spec;
  if (arch == "mlp") {
    nn::MlpSpec s;
    s.dims = r.get<std::vector<std::size_t>>("dims", s.dims);
    check(s.dims.size() >= 2, "model.dims: need at least input and output widths");
    for (auto d : s.dims) check(d > 0, "model.dims: widths must be positive");
    spec.arch = s;
  } else if (arch == "micro-cnn") {
    nn::CnnSpec s;
    s.in_channels = r.get("in_channels", s.in_channels);
    s.height = r.get("height", s.height);
    s.width = r.get("width", s.width);
    s.conv1_channels = r.get("conv1_channels", s.conv1_channels);
    s.conv2_channels = r.get("conv2_channels", s.conv2_channels);
    s.classes = r.get("classes", s.classes);
    check(s.in_channels > 0 && s.conv1_channels > 0 && s.conv2_channels > 0 && s.classes >= 2,
          "model: channel and class counts must be positive (classes >= 2)");
    check(s.height >= 2 && s.width >= 2, "model: image must be at least 2x2");
    spec.arch = s;
  } else if (arch == "tiny-transformer") {
    nn::TransformerSpec s;
    s.vocab = r.get("vocab", s.vocab);
    s.max_seq_len = r.get("max_seq_len", s.max_seq_len);
    s.model_dim = r.get("model_dim", s.model_dim);
    s.blocks = r.get("blocks", s.blocks);
    s.mlp_hidden = r.get("mlp_hidden", s.mlp_hidden);
    s.classes = r.get("classes", s.classes);
    s.dropout = r.get("dropout", s.dropout);
    check(s.vocab > 0 && s.max_seq_len > 0 && s.model_dim > 0 && s.mlp_hidden > 0 && s.classes >= 2,
          "model: transformer sizes must be positive (classes >= 2)");
    check(s.dropout >= 0.0 && s.dropout < 1.0, "model.dropout must lie in [0, 1)");
    spec.arch = s;
  } else {
    throw ConfigError("model.arch: unknown architecture '" + arch + "'");
  }
  r.done();
  return spec;
}

Json to_json(const nn::ModelSpec& spec) {
  Json j;
  j["arch"] = nn::architecture_name(spec.kind());
  if (const auto* s = std::get_if<nn::MlpSpec>(&spec.arch)) {
    j["dims"] = s->dims;
  } else if (const auto* c = std::get_if<nn::CnnSpec>(&spec.arch)) {
    j["in_channels"] = c->in_channels;
    j["height"] = c->height;
    j["width"] = c->width;
    j["conv1_channels"] = c->conv1_channels;
    j["conv2_channels"] = c->conv2_channels;
    j["classes"] = c->classes;
  } else {
    const auto& t = std::get<nn::TransformerSpec>(spec.arch);
    j["vocab"] = t.vocab;
    j["max_seq_len"] = t.max_seq_len;
    j["model_dim"] = t.model_dim;
    j["blocks"] = t.blocks;
    j["mlp_hidden"] = t.mlp_hidden;
    j["classes"] = t.classes;
    j["dropout"] = t.dropout;
  }
  return j;
}

DatasetSpec parse_dataset(const Json& j) {
  Reader r(j, "dataset");
  DatasetSpec d;
  const auto kind = r.need<std::string>("kind");
  if (kind == "idx-images") {
    d.kind = DatasetKind::kIdx;
    d.train_images = r.need<std::string>("train_images");
    d.train_labels = r.need<std::string>("train_labels");
    d.val_images = r.need<std::string>("val_images");
    d.val_labels = r.need<std::string>("val_labels");
    d.mean = r.get("mean", d.mean);
    d.stddev = r.get("std", d.stddev);
    d.train_limit = r.get("train_limit", d.train_limit);
    d.val_limit = r.get("val_limit", d.val_limit);
    d.classes = r.get("classes", d.classes);
    check(d.stddev > 0.0, "dataset.std must be positive");
  } else if (kind == "synthetic-blobs") {
    d.kind = DatasetKind::kBlobs;
    d.train_size = r.get("train_size", d.train_size);
    d.val_size = r.get("val_size", d.val_size);
    d.data_seed = r.get("data_seed", d.data_seed);
    d.classes = r.get("classes", d.classes);
    d.dim = r.get("dim", d.dim);
    d.clusters_per_class = r.get("clusters_per_class", d.clusters_per_class);
    d.separation = r.get("separation", d.separation);
    d.noise = r.get("noise", d.noise);
    d.label_noise = r.get("label_noise", d.label_noise);
    check(d.classes >= 2 && d.dim > 0 && d.clusters_per_class > 0, "dataset: blobs need classes >= 2 and dim > 0");
    check(d.noise > 0.0 && d.separation >= 0.0, "dataset: noise must be positive, separation non-negative");
    check(d.label_noise >= 0.0 && d.label_noise < 1.0, "dataset.label_noise must lie in [0, 1)");
  } else if (kind == "synthetic-sequences") {
    d.kind = DatasetKind::kSequences;
    d.train_size = r.get("train_size", d.train_size);
    d.val_size = r.get("val_size", d.val_size);
    d.data_seed = r.get("data_seed", d.data_seed);
    d.rule = r.get("rule", d.rule);
    d.vocab = r.get("vocab", d.vocab);
    d.length = r.get("length", d.length);
    d.threshold = r.get("threshold", d.threshold);
    d.classes = r.get("classes", std::size_t{2});
    check(d.rule == "majority" || d.rule == "first_token_mod" || d.rule == "count_threshold",
          "dataset.rule: expected majority, first_token_mod or count_threshold");
    check(d.vocab >= 2 && d.length >= 1 && d.classes >= 2, "dataset: sequences need vocab >= 2, length >= 1");
    if (d.rule != "first_token_mod") check(d.classes == 2, "dataset: rule '" + d.rule + "' is binary");
  } else {
    throw ConfigError("dataset.kind: unknown kind '" + kind + "'");
  }
  d.label_permutation = r.opt<std::uint64_t>("label_permutation");
  check(d.kind == DatasetKind::kIdx || (d.train_size > 0 && d.val_size > 0), "dataset: split sizes must be positive");
  r.done();
  return d;
}

Json to_json(const DatasetSpec& d) {
  Json j;
  j["kind"] = dataset_kind_name(d.kind);
  switch (d.kind) {
    case DatasetKind::kIdx:
      j["train_images"] = d.train_images;
      j["train_labels"] = d.train_labels;
      j["val_images"] = d.val_images;
      j["val_labels"] = d.val_labels;
      j["mean"] = d.mean;
      j["std"] = d.stddev;
      j["train_limit"] = d.train_limit;
      j["val_limit"] = d.val_limit;
      j["classes"] = d.classes;
      break;
    case DatasetKind::kBlobs:
      j["train_size"] = d.train_size;
      j["val_size"] = d.val_size;
      j["data_seed"] = d.data_seed;
      j["classes"] = d.classes;
      j["dim"] = d.dim;
      j["clusters_per_class"] = d.clusters_per_class;
      j["separation"] = d.separation;
      j["noise"] = d.noise;
      j["label_noise"] = d.label_noise;
      break;
    case DatasetKind::kSequences:
      j["train_size"] = d.train_size;
      j["val_size"] = d.val_size;
      j["data_seed"] = d.data_seed;
      j["rule"] = d.rule;
      j["vocab"] = d.vocab;
      j["length"] = d.length;
      j["threshold"] = d.threshold;
      j["classes"] = d.classes;
      break;
  }
  j["label_permutation"] = opt_json(d.label_permutation);
  return j;
}

ExperimentConfig parse_experiment(const Json& j) {
  Reader r(j, "config");
  ExperimentConfig c;
  c.seed = r.get("seed", c.seed);
  const Json* model = r.child("model");
  if (!model) throw ConfigError("config: missing 'model'");
  c.model = parse_model(*model);
  const Json* data = r.child("dataset");
  if (!data) throw ConfigError("config: missing 'dataset'");
  c.dataset = parse_dataset(*data);
  c.method = parse_method(r.get<std::string>("method", "dense"));
  c.distribution = sparsify::parse_distribution(r.get<std::string>("distribution", "global"));
  c.keep_dense = r.get("keep_dense", c.keep_dense);
  c.target_sparsity = r.get("target_sparsity", c.target_sparsity);
  c.epochs = r.get("epochs", c.epochs);
  c.multiplier = r.get("multiplier", c.multiplier);
  c.batch_size = r.get("batch_size", c.batch_size);
  c.eval_batch_size = r.get("eval_batch_size", c.eval_batch_size);
  c.oneshot_epoch = r.opt<double>("oneshot_epoch");
  c.verbose = r.get("verbose", c.verbose);

  if (const Json* o = r.child("optimizer")) {
    Reader ro(*o, "optimizer");
    c.optimizer.schedule = optim::parse_lr_kind(ro.get<std::string>("schedule", "linear"));
    c.optimizer.peak_lr = ro.get("peak_lr", c.optimizer.peak_lr);
    c.optimizer.warmup_epochs = ro.get("warmup_epochs", c.optimizer.warmup_epochs);
    c.optimizer.momentum = ro.get("momentum", c.optimizer.momentum);
    c.optimizer.weight_decay = ro.get("weight_decay", c.optimizer.weight_decay);
    c.optimizer.label_smoothing = ro.get("label_smoothing", c.optimizer.label_smoothing);
    ro.done();
  }
  if (const Json* a = r.child("acdc")) {
    Reader ra(*a, "acdc");
    c.acdc.warmup_epochs = ra.opt<double>("warmup_epochs");
    c.acdc.phase_len = ra.get("phase_len", c.acdc.phase_len);
    c.acdc.last_decompression = ra.get("last_decompression", c.acdc.last_decompression);
    c.acdc.last_compression = ra.get("last_compression", c.acdc.last_compression);
    c.acdc.decompression_sparsity = ra.get("decompression_sparsity", c.acdc.decompression_sparsity);
    c.acdc.sparse_fraction = ra.get("sparse_fraction", c.acdc.sparse_fraction);
    c.acdc.progressive = ra.get("progressive", c.acdc.progressive);
    c.acdc.progressive_start = ra.get("progressive_start", c.acdc.progressive_start);
    c.acdc.progressive_end_epoch = ra.opt<double>("progressive_end_epoch");
    ra.done();
  }
  if (const Json* g = r.child("gmp")) {
    Reader rg(*g, "gmp");
    c.gmp.ramp_start = rg.get("ramp_start", c.gmp.ramp_start);
    c.gmp.ramp_end = rg.opt<double>("ramp_end");
    c.gmp.update_every = rg.get("update_every", c.gmp.update_every);
    rg.done();
  }
  if (const Json* g = r.child("rigl")) {
    Reader rg(*g, "rigl");
    c.rigl.alpha = rg.get("alpha", c.rigl.alpha);
    c.rigl.t_end = rg.opt<double>("t_end");
    c.rigl.delta_t = rg.get("delta_t", c.rigl.delta_t);
    rg.done();
  }
  if (const Json* k = r.child("checkpoint")) {
    Reader rk(*k, "checkpoint");
    c.checkpoint.enabled = rk.get("enabled", c.checkpoint.enabled);
    c.checkpoint.every = rk.get("every", c.checkpoint.every);
    c.checkpoint.align = rk.get("align", c.checkpoint.align);
    rk.done();
  }
  if (const Json* d = r.child("diagnostics")) {
    Reader rd(*d, "diagnostics");
    c.diagnostics.train_metrics = rd.get("train_metrics", c.diagnostics.train_metrics);
    rd.done();
  }
  r.done();

  check(c.epochs > 0, "epochs must be positive");
  check(c.multiplier > 0.0, "multiplier must be positive");
  check(c.total_epochs() > 0, "multiplier leaves no epochs");
  check(c.batch_size > 0 && c.eval_batch_size > 0, "batch sizes must be positive");
  check(c.target_sparsity >= 0.0 && c.target_sparsity < 1.0, "target_sparsity must lie in [0, 1)");
  check(c.optimizer.peak_lr >= 0.0, "optimizer.peak_lr must be non-negative");
  check(c.optimizer.warmup_epochs >= 0.0 && c.optimizer.warmup_epochs <= static_cast<double>(c.epochs),
        "optimizer.warmup_epochs must lie in [0, epochs]");
  check(c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0, "optimizer.momentum must lie in [0, 1)");
  check(c.optimizer.weight_decay >= 0.0, "optimizer.weight_decay must be non-negative");
  check(c.optimizer.label_smoothing >= 0.0 && c.optimizer.label_smoothing < 1.0,
        "optimizer.label_smoothing must lie in [0, 1)");
  check(c.acdc.decompression_sparsity >= 0.0 && c.acdc.decompression_sparsity <= c.target_sparsity,
        "acdc.decompression_sparsity must lie in [0, target_sparsity]");
  check(c.acdc.sparse_fraction > 0.0 && c.acdc.sparse_fraction < 1.0, "acdc.sparse_fraction must lie in (0, 1)");
  check(!c.acdc.progressive || c.acdc.progressive_start <= c.target_sparsity,
        "acdc.progressive_start must not exceed target_sparsity");
  check(c.gmp.update_every > 0, "gmp.update_every must be positive");
  check(c.rigl.delta_t > 0, "rigl.delta_t must be positive");
  check(c.rigl.alpha >= 0.0 && c.rigl.alpha <= 1.0, "rigl.alpha must lie in [0, 1]");
  check(c.checkpoint.every > 0, "checkpoint.every must be positive");
  check(c.checkpoint.align == "cadence" || c.checkpoint.align == "acdc-phases",
        "checkpoint.align must be 'cadence' or 'acdc-phases'");

  const auto params = nn::describe_params(c.model);
  std::vector<std::string> prunable;
  for (const auto& p : params)
    if (p.prunable) prunable.push_back(p.name);
  for (const auto& name : c.keep_dense) {
    if (name == "@first" || name == "@last") continue;
    check(std::find(prunable.begin(), prunable.end(), name) != prunable.end(),
          "keep_dense: '" + name + "' is not a prunable layer of the model");
  }
  check(c.dataset.classes == c.model.num_classes(), "dataset classes do not match the model's class count");
  if (c.dataset.kind == DatasetKind::kBlobs) {
    check(c.model.accepts_width(c.dataset.dim), "dataset.dim does not match the model input");
  } else if (c.dataset.kind == DatasetKind::kSequences) {
    check(c.model.kind() == nn::Architecture::kTinyTransformer, "synthetic-sequences needs the tiny-transformer");
    check(c.model.accepts_width(c.dataset.length), "dataset.length exceeds the model's max_seq_len");
    check(c.dataset.vocab <= std::get<nn::TransformerSpec>(c.model.arch).vocab,
          "dataset.vocab exceeds the model vocabulary");
  }
  if (c.method == Method::kAcdc) {
    try {
      (void)sparsify::acdc_phases(acdc_schedule(c));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["model"] = to_json(c.model);
  j["dataset"] = to_json(c.dataset);
  j["method"] = method_name(c.method);
  j["distribution"] = sparsify::distribution_name(c.distribution);
  j["keep_dense"] = c.keep_dense;
  j["target_sparsity"] = c.target_sparsity;
  j["epochs"] = c.epochs;
  j["multiplier"] = c.multiplier;
  j["batch_size"] = c.batch_size;
  j["eval_batch_size"] = c.eval_batch_size;
  j["oneshot_epoch"] = opt_json(c.oneshot_epoch);
  j["verbose"] = c.verbose;
  j["optimizer"] = {{"schedule", optim::lr_kind_name(c.optimizer.schedule)},
                    {"peak_lr", c.optimizer.peak_lr},
                    {"warmup_epochs", c.optimizer.warmup_epochs},
                    {"momentum", c.optimizer.momentum},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"label_smoothing", c.optimizer.label_smoothing}};
  j["acdc"] = {{"warmup_epochs", opt_json(c.acdc.warmup_epochs)},
               {"phase_len", c.acdc.phase_len},
               {"last_decompression", c.acdc.last_decompression},
               {"last_compression", c.acdc.last_compression},
               {"decompression_sparsity", c.acdc.decompression_sparsity},
               {"sparse_fraction", c.acdc.sparse_fraction},
               {"progressive", c.acdc.progressive},
               {"progressive_start", c.acdc.progressive_start},
               {"progressive_end_epoch", opt_json(c.acdc.progressive_end_epoch)}};
  j["gmp"] = {{"ramp_start", c.gmp.ramp_start}, {"ramp_end", opt_json(c.gmp.ramp_end)}, {"update_every", c.gmp.update_every}};
  j["rigl"] = {{"alpha", c.rigl.alpha}, {"t_end", opt_json(c.rigl.t_end)}, {"delta_t", c.rigl.delta_t}};
  j["checkpoint"] = {{"enabled", c.checkpoint.enabled}, {"every", c.checkpoint.every}, {"align", c.checkpoint.align}};
  j["diagnostics"] = {{"train_metrics", c.diagnostics.train_metrics}};
  return j;
}

sparsify::AcdcSchedule acdc_schedule(const ExperimentConfig& c) {
  const double base = static_cast<double>(c.epochs);
  const double m = c.multiplier;
  sparsify::AcdcSchedule s;
  s.total_epochs = c.total_epochs();
  s.warmup = scaled_epoch(c.acdc.warmup_epochs.value_or(0.1 * base), m);
  s.phase_len = scaled_epoch(c.acdc.phase_len, m);
  s.last_decompression = scaled_epoch(c.acdc.last_decompression, m);
  s.last_compression = scaled_epoch(c.acdc.last_compression, m);
  s.target = c.target_sparsity;
  s.decompression_sparsity = c.acdc.decompression_sparsity;
  s.sparse_fraction = c.acdc.sparse_fraction;
  if (c.acdc.progressive) {
    sparsify::ProgressiveRamp ramp;
    ramp.start_sparsity = c.acdc.progressive_start;
    ramp.start_epoch = s.warmup;
    ramp.end_epoch = c.acdc.progressive_end_epoch ? scaled_epoch(*c.acdc.progressive_end_epoch, m)
                                                  : s.total_epochs - s.last_compression;
    s.ramp = ramp;
  }
  return s;
}

sparsify::GmpSchedule gmp_schedule(const ExperimentConfig& c) {
  const double base = static_cast<double>(c.epochs);
  sparsify::GmpSchedule s;
  s.final_sparsity = c.target_sparsity;
  s.ramp_start = c.gmp.ramp_start * c.multiplier;
  s.ramp_end = c.gmp.ramp_end.value_or(0.75 * base) * c.multiplier;
  s.update_every = c.gmp.update_every;
  s.total = static_cast<double>(c.total_epochs());
  return s;
}

sparsify::RiglSchedule rigl_schedule(const ExperimentConfig& c) {
  sparsify::RiglSchedule s;
  s.alpha = c.rigl.alpha;
  s.t_end = c.rigl.t_end.value_or(0.75 * static_cast<double>(c.epochs)) * c.multiplier;
  s.delta_t = c.rigl.delta_t;
  return s;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace sparselab::runner
