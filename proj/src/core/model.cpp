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

#include "sparselab/core/model.hpp"

#include <cmath>

#include "sparselab/core/ops.hpp"

namespace sparselab::nn {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

ParamInfo weight(std::string name, Shape shape, LayerKind layer, std::size_t fan_in,
                 std::size_t applications) {
  ParamInfo p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.role = ParamRole::kWeight;
  p.layer = layer;
  p.prunable = true;
  p.fan_in = fan_in;
  p.applications = applications;
  return p;
}

ParamInfo vector_param(std::string name, std::size_t len, ParamRole role) {
  ParamInfo p;
  p.name = std::move(name);
  p.shape = {len};
  p.role = role;
  return p;
}

}  // namespace

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kMlp: return "mlp";
    case Architecture::kMicroCnn: return "micro-cnn";
    case Architecture::kTinyTransformer: return "tiny-transformer";
  }
  return "unknown";
}

std::size_t ModelSpec::num_classes() const {
  return std::visit(Overloaded{[](const MlpSpec& s) { return s.dims.back(); },
                               [](const CnnSpec& s) { return s.classes; },
                               [](const TransformerSpec& s) { return s.classes; }},
                    arch);
}

std::size_t ModelSpec::input_width() const {
  return std::visit(Overloaded{[](const MlpSpec& s) { return s.dims.front(); },
                               [](const CnnSpec& s) { return s.in_channels * s.height * s.width; },
                               [](const TransformerSpec& s) { return s.max_seq_len; }},
                    arch);
}

bool ModelSpec::accepts_width(std::size_t width) const {
  if (kind() == Architecture::kTinyTransformer) return width >= 1 && width <= input_width();
  return width == input_width();
}

std::vector<ParamInfo> describe_params(const ModelSpec& spec) {
  std::vector<ParamInfo> out;
  std::visit(
      Overloaded{
          [&](const MlpSpec& s) {
            require(s.dims.size() >= 2, "mlp needs at least input and output dims");
            for (std::size_t i = 0; i + 1 < s.dims.size(); ++i) {
              const bool head = i + 2 == s.dims.size();
              auto w = weight("fc" + std::to_string(i) + ".weight", {s.dims[i + 1], s.dims[i]},
                              LayerKind::kLinear, s.dims[i], 1);
              w.is_head = head;
              auto b = vector_param("fc" + std::to_string(i) + ".bias", s.dims[i + 1], ParamRole::kBias);
              b.is_head = head;
              out.push_back(std::move(w));
              out.push_back(std::move(b));
            }
          },
          [&](const CnnSpec& s) {
            require(s.height >= 2 && s.width >= 2, "micro-cnn input too small for pooling");
            const std::size_t hw = s.height * s.width;
            out.push_back(weight("conv1.weight", {s.conv1_channels, s.in_channels, 3, 3}, LayerKind::kConv,
                                 s.in_channels * 9, hw));
            out.push_back(vector_param("conv1.bias", s.conv1_channels, ParamRole::kBias));
            out.push_back(weight("conv2.weight", {s.conv2_channels, s.conv1_channels, 3, 3},
                                 LayerKind::kConv, s.conv1_channels * 9, hw));
            out.push_back(vector_param("conv2.bias", s.conv2_channels, ParamRole::kBias));
            const std::size_t flat = s.conv2_channels * (s.height / 2) * (s.width / 2);
            auto w = weight("head.weight", {s.classes, flat}, LayerKind::kLinear, flat, 1);
            w.is_head = true;
            auto b = vector_param("head.bias", s.classes, ParamRole::kBias);
            b.is_head = true;
            out.push_back(std::move(w));
            out.push_back(std::move(b));
          },
          [&](const TransformerSpec& s) {
            const std::size_t d = s.model_dim, len = s.max_seq_len;
            ParamInfo tok;
            tok.name = "embed.token";
            tok.shape = {s.vocab, d};
            tok.role = ParamRole::kEmbedding;
            ParamInfo pos = tok;
            pos.name = "embed.position";
            pos.shape = {len, d};
            out.push_back(tok);
            out.push_back(pos);
            for (std::size_t b = 0; b < s.blocks; ++b) {
              const std::string pre = "blocks." + std::to_string(b) + ".";
              auto push_block = [&](ParamInfo p) {
                p.block = static_cast<int>(b);
                out.push_back(std::move(p));
              };
              push_block(vector_param(pre + "ln1.weight", d, ParamRole::kNorm));
              push_block(vector_param(pre + "ln1.bias", d, ParamRole::kNorm));
              for (const char* m : {"q", "k", "v", "o"}) {
                push_block(weight(pre + "attn." + m + ".weight", {d, d}, LayerKind::kLinear, d, len));
                push_block(vector_param(pre + "attn." + m + ".bias", d, ParamRole::kBias));
              }
              push_block(vector_param(pre + "ln2.weight", d, ParamRole::kNorm));
              push_block(vector_param(pre + "ln2.bias", d, ParamRole::kNorm));
              push_block(weight(pre + "mlp.fc1.weight", {s.mlp_hidden, d}, LayerKind::kLinear, d, len));
              push_block(vector_param(pre + "mlp.fc1.bias", s.mlp_hidden, ParamRole::kBias));
              push_block(weight(pre + "mlp.fc2.weight", {d, s.mlp_hidden}, LayerKind::kLinear, s.mlp_hidden, len));
              push_block(vector_param(pre + "mlp.fc2.bias", d, ParamRole::kBias));
            }
            out.push_back(vector_param("final_ln.weight", d, ParamRole::kNorm));
            out.push_back(vector_param("final_ln.bias", d, ParamRole::kNorm));
            auto w = weight("head.weight", {s.classes, d}, LayerKind::kLinear, d, 1);
            w.is_head = true;
            auto hb = vector_param("head.bias", s.classes, ParamRole::kBias);
            hb.is_head = true;
            out.push_back(std::move(w));
            out.push_back(std::move(hb));
          }},
      spec.arch);
  return out;
}

void ParamStore::add(ParamInfo info, Tensor value) {
  require(value.shape() == info.shape, "parameter " + info.name + " has shape " +
                                           shape_str(value.shape()) + ", expected " + shape_str(info.shape));
  require(!index_.count(info.name), "duplicate parameter " + info.name);
  index_[info.name] = entries_.size();
  entries_.push_back(ParamEntry{std::move(info), std::move(value), std::nullopt, true});
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto i = find(name);
  if (!i) fail("unknown parameter " + name);
  return entries_[*i];
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto i = find(name);
  if (!i) fail("unknown parameter " + name);
  return entries_[*i];
}

void ParamStore::set_mask(std::size_t i, Tensor mask) {
  ParamEntry& e = entries_.at(i);
  require(mask.shape() == e.value.shape(), "mask shape " + shape_str(mask.shape()) +
                                               " does not match " + e.info.name + " " +
                                               shape_str(e.value.shape()));
  for (std::size_t j = 0; j < mask.numel(); ++j) {
    require(mask[j] == 0.0f || mask[j] == 1.0f, "mask values must be 0 or 1");
    if (mask[j] == 0.0f) e.value[j] = 0.0f;
  }
  e.mask = std::move(mask);
}

void ParamStore::clear_masks() {
  for (auto& e : entries_) e.mask.reset();
}

bool ParamStore::enforce_masks() {
  bool clean = true;
  for (auto& e : entries_) {
    if (!e.mask) continue;
    for (std::size_t j = 0; j < e.value.numel(); ++j)
      if ((*e.mask)[j] == 0.0f && e.value[j] != 0.0f) {
        clean = false;
        e.value[j] = 0.0f;
      }
  }
  return clean;
}

void ParamStore::set_all_trainable(bool trainable) {
  for (auto& e : entries_) e.trainable = trainable;
}

std::size_t ParamStore::total_params() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

Model make_model(const ModelSpec& spec, Rng& init_rng) {
  Model model{spec, {}};
  const bool transformer = spec.kind() == Architecture::kTinyTransformer;
  for (ParamInfo& info : describe_params(spec)) {
    Tensor t(info.shape);
    if (info.role == ParamRole::kNorm && info.name.ends_with(".weight")) {
      t.fill(1.0f);
    } else if (info.role == ParamRole::kWeight || info.role == ParamRole::kEmbedding) {
      if (transformer) {
        for (auto& v : t.values()) v = static_cast<float>(init_rng.normal(0.0, 0.02));
      } else {
        const double bound = std::sqrt(6.0 / static_cast<double>(info.fan_in));
        for (auto& v : t.values()) v = static_cast<float>(init_rng.uniform(-bound, bound));
      }
    }
    model.params.add(std::move(info), std::move(t));
  }
  return model;
}

template <class T>
Var build_logits(Tape<T>& tape, const ModelSpec& spec, std::span<const Var> p,
                 const BasicTensor<T>& batch, const ForwardMode& mode) {
  require(batch.rank() == 2, "batch must be (N, features)");
  require(spec.accepts_width(batch.dim(1)), "batch width " + std::to_string(batch.dim(1)) +
                                                " does not match model input " +
                                                std::to_string(spec.input_width()));
  const std::size_t n = batch.dim(0);
  return std::visit(
      Overloaded{
          [&](const MlpSpec& s) {
            Var h = tape.constant(batch);
            const std::size_t layers = s.dims.size() - 1;
            for (std::size_t i = 0; i < layers; ++i) {
              h = ops::linear(tape, h, p[2 * i], p[2 * i + 1]);
              if (i + 1 < layers) h = ops::relu(tape, h);
            }
            return h;
          },
          [&](const CnnSpec& s) {
            Var x = tape.constant(batch.reshaped({n, s.in_channels, s.height, s.width}));
            x = ops::relu(tape, ops::conv3x3(tape, x, p[0], p[1]));
            x = ops::relu(tape, ops::conv3x3(tape, x, p[2], p[3]));
            x = ops::maxpool2(tape, x);
            x = ops::reshape(tape, x, {n, s.conv2_channels * (s.height / 2) * (s.width / 2)});
            return ops::linear(tape, x, p[4], p[5]);
          },
          [&](const TransformerSpec& s) {
            const std::size_t len = batch.dim(1);
            const bool drop = mode.train && s.dropout > 0.0;
            require(!drop || mode.dropout_rng, "dropout needs an rng in train mode");
            auto maybe_drop = [&](Var v) { return drop ? ops::dropout(tape, v, s.dropout, *mode.dropout_rng) : v; };
            Var x = ops::embed(tape, batch, p[0], p[1]);
            std::size_t k = 2;
            for (std::size_t b = 0; b < s.blocks; ++b) {
              Var h = ops::layer_norm(tape, x, p[k], p[k + 1]);
              Var q = ops::linear(tape, h, p[k + 2], p[k + 3]);
              Var kk = ops::linear(tape, h, p[k + 4], p[k + 5]);
              Var v = ops::linear(tape, h, p[k + 6], p[k + 7]);
              Var a = ops::attention(tape, q, kk, v, n, len);
              Var o = ops::linear(tape, a, p[k + 8], p[k + 9]);
              x = ops::add(tape, x, maybe_drop(o));
              Var h2 = ops::layer_norm(tape, x, p[k + 10], p[k + 11]);
              Var m = ops::relu(tape, ops::linear(tape, h2, p[k + 12], p[k + 13]));
              m = ops::linear(tape, m, p[k + 14], p[k + 15]);
              x = ops::add(tape, x, maybe_drop(m));
              k += 16;
            }
            Var pooled = ops::mean_pool(tape, x, n, len);
            pooled = ops::layer_norm(tape, pooled, p[k], p[k + 1]);
            return ops::linear(tape, pooled, p[k + 2], p[k + 3]);
          }},
      spec.arch);
}

template Var build_logits<float>(Tape<float>&, const ModelSpec&, std::span<const Var>,
                                 const BasicTensor<float>&, const ForwardMode&);
template Var build_logits<double>(Tape<double>&, const ModelSpec&, std::span<const Var>,
                                  const BasicTensor<double>&, const ForwardMode&);

Tensor forward(const Model& model, const Tensor& batch) {
  Tape<float> tape;
  std::vector<Var> vars;
  vars.reserve(model.params.size());
  for (const auto& e : model.params.entries()) vars.push_back(tape.constant(e.value));
  Var logits = build_logits(tape, model.spec, vars, batch, ForwardMode{});
  Tensor out = tape.value(logits);
  require(out.all_finite(), "non-finite activation in forward pass");
  return out;
}

GradResult grad(const Model& model, const Tensor& batch, std::span<const int> labels,
                const LossConfig& loss, const ForwardMode& mode) {
  Tape<float> tape;
  std::vector<Var> vars;
  vars.reserve(model.params.size());
  for (const auto& e : model.params.entries())
    vars.push_back(e.trainable ? tape.variable(e.value) : tape.constant(e.value));
  Var logits = build_logits(tape, model.spec, vars, batch, mode);
  require(tape.value(logits).all_finite(), "non-finite activation in forward pass");
  Var l = ops::cross_entropy(tape, logits, labels, loss.label_smoothing);
  tape.backward(l);
  GradResult out;
  out.loss = tape.value(l)[0];
  out.grads.resize(model.params.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& e = model.params[i];
    if (!e.trainable) continue;
    const Tensor& g = tape.grad(vars[i]);
    out.grads[i] = g.empty() ? Tensor(e.value.shape()) : g;
  }
  return out;
}

template <class T>
double loss_and_grad(const ModelSpec& spec, const std::vector<BasicTensor<T>>& params,
                     const BasicTensor<T>& batch, std::span<const int> labels, const LossConfig& loss,
                     std::vector<BasicTensor<T>>* grads) {
  Tape<T> tape;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(grads ? tape.variable(p) : tape.constant(p));
  Var logits = build_logits(tape, spec, vars, batch, ForwardMode{});
  Var l = ops::cross_entropy(tape, logits, labels, loss.label_smoothing);
  const double value = tape.value(l)[0];
  if (grads) {
    tape.backward(l);
    grads->clear();
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const auto& g = tape.grad(vars[i]);
      grads->push_back(g.empty() ? BasicTensor<T>(params[i].shape()) : g);
    }
  }
  return value;
}

template double loss_and_grad<float>(const ModelSpec&, const std::vector<BasicTensor<float>>&,
                                     const BasicTensor<float>&, std::span<const int>, const LossConfig&,
                                     std::vector<BasicTensor<float>>*);
template double loss_and_grad<double>(const ModelSpec&, const std::vector<BasicTensor<double>>&,
                                      const BasicTensor<double>&, std::span<const int>, const LossConfig&,
                                      std::vector<BasicTensor<double>>*);

}  // namespace sparselab::nn
