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

#include "sparselab/runner/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>

#include "sparselab/core/error.hpp"

namespace sparselab::runner {

std::string tensor_kind_name(TensorKind k) {
  switch (k) {
    case TensorKind::kWeights: return "weights";
    case TensorKind::kMask: return "mask";
    case TensorKind::kMomentum: return "momentum";
  }
  return "?";
}

namespace {

TensorKind parse_kind(const std::string& s) {
  for (TensorKind k : {TensorKind::kWeights, TensorKind::kMask, TensorKind::kMomentum})
    if (tensor_kind_name(k) == s) return k;
  fail("checkpoint: unknown tensor kind '" + s + "'");
}

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])} << (8 * i);
  return v;
}

void append_f32(std::string& out, std::span<const float> values) {
  const std::size_t at = out.size();
  out.resize(at + values.size() * 4);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + at, values.data(), values.size() * 4);
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &values[i], 4);
      for (int b = 0; b < 4; ++b) out[at + i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
  }
}

void read_f32(const std::string& in, std::size_t at, std::span<float> out) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), in.data() + at, out.size() * 4);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto bits = static_cast<std::uint32_t>(get_le(in, at + i * 4, 4));
      std::memcpy(&out[i], &bits, 4);
    }
  }
}

}  // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  if (a.tensors.size() != b.tensors.size() || a.metadata != b.metadata) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    const auto& x = a.tensors[i];
    const auto& y = b.tensors[i];
    if (x.name != y.name || x.kind != y.kind || !bit_identical(x.value, y.value)) return false;
  }
  return true;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Json header;
  header["tensors"] = Json::array();
  std::string payload;
  for (const auto& t : ckpt.tensors) {
    header["tensors"].push_back({{"name", t.name},
                                 {"kind", tensor_kind_name(t.kind)},
                                 {"shape", t.value.shape()},
                                 {"offset", payload.size()}});
    append_f32(payload, t.value.span());
  }
  header["payload_bytes"] = payload.size();
  header["metadata"] = ckpt.metadata;
  const std::string text = header.dump();

  std::string out = "SPLB";
  put_le(out, kCheckpointVersion, 4);
  put_le(out, text.size(), 8);
  out += text;
  out += payload;
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open checkpoint '" + path + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 16 || bytes.compare(0, 4, "SPLB") != 0) fail("'" + path + "' is not a checkpoint (bad magic)");
  const auto version = get_le(bytes, 4, 4);
  if (version != kCheckpointVersion) fail("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = get_le(bytes, 8, 8);
  if (16 + hlen > bytes.size()) fail("checkpoint header truncated in '" + path + "'");
  Json header;
  try {
    header = Json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    fail("checkpoint header unreadable in '" + path + "': " + e.what());
  }
  const std::size_t base = 16 + hlen;
  const std::size_t payload = bytes.size() - base;
  Checkpoint ck;
  try {
    if (header.at("payload_bytes").get<std::size_t>() != payload) fail("checkpoint payload size mismatch in '" + path + "'");
    for (const auto& t : header.at("tensors")) {
      StoredTensor st;
      st.name = t.at("name").get<std::string>();
      st.kind = parse_kind(t.at("kind").get<std::string>());
      const Shape shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      st.value = Tensor(shape);
      if (offset > payload || st.value.numel() * 4 > payload - offset)
        fail("checkpoint tensor '" + st.name + "' lies outside the payload");
      read_f32(bytes, base + offset, st.value.span());
      ck.tensors.push_back(std::move(st));
    }
    ck.metadata = header.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    fail("checkpoint header malformed in '" + path + "': " + e.what());
  }
  return ck;
}

Checkpoint capture(const nn::Model& model, const optim::SgdState* state, Json metadata) {
  Checkpoint ck;
  const auto& p = model.params;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ck.tensors.push_back({p[i].info.name, TensorKind::kWeights, p[i].value});
    if (p[i].mask) ck.tensors.push_back({p[i].info.name, TensorKind::kMask, *p[i].mask});
    if (state) ck.tensors.push_back({p[i].info.name, TensorKind::kMomentum, state->momentum.at(i)});
  }
  ck.metadata = std::move(metadata);
  return ck;
}

ExperimentConfig checkpoint_config(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("config")) fail("checkpoint carries no config");
  return parse_experiment(ckpt.metadata.at("config"));
}

nn::Model restore_model(const Checkpoint& ckpt, optim::SgdState* state) {
  const nn::ModelSpec spec = ckpt.metadata.contains("model") ? parse_model(ckpt.metadata.at("model"))
                                                             : checkpoint_config(ckpt).model;
  Rng unused(0);
  nn::Model m = nn::make_model(spec, unused);
  std::vector<bool> loaded(m.params.size(), false);
  if (state) {
    state->momentum.clear();
    for (const auto& e : m.params.entries()) state->momentum.push_back(Tensor::zeros_like(e.value));
  }
  for (const auto& t : ckpt.tensors) {
    const auto idx = m.params.find(t.name);
    if (!idx) fail("checkpoint tensor '" + t.name + "' does not belong to the architecture");
    auto& e = m.params[*idx];
    if (t.value.shape() != e.value.shape()) fail("checkpoint tensor '" + t.name + "' has the wrong shape");
    switch (t.kind) {
      case TensorKind::kWeights:
        e.value = t.value;
        loaded[*idx] = true;
        break;
      case TensorKind::kMask:
        e.mask = t.value;
        break;
      case TensorKind::kMomentum:
        if (state) state->momentum[*idx] = t.value;
        break;
    }
  }
  for (std::size_t i = 0; i < loaded.size(); ++i)
    if (!loaded[i]) fail("checkpoint lacks weights for '" + m.params[i].info.name + "'");
  return m;
}

std::string checkpoint_filename(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_e%05zu.splb", epoch);
  return buf;
}

std::vector<std::string> list_checkpoints(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) fail("'" + dir + "' is not a directory");
  static const std::regex pattern(R"(ckpt_e(\d+)\.splb)");
  std::vector<std::pair<std::size_t, std::string>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) found.emplace_back(std::stoul(m[1].str()), entry.path().string());
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

}  // namespace sparselab::runner
