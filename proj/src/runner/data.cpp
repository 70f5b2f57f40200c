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

#include "sparselab/runner/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "sparselab/core/error.hpp"
#include "sparselab/core/rng.hpp"

namespace sparselab::runner {

Tensor Dataset::gather(std::span<const std::size_t> rows, std::vector<int>* labels_out) const {
  const std::size_t w = width();
  Tensor out({rows.size(), w});
  if (labels_out) labels_out->resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < size(), "dataset row out of range");
    std::copy_n(inputs.data() + rows[r] * w, w, out.data() + r * w);
    if (labels_out) (*labels_out)[r] = labels[rows[r]];
  }
  return out;
}

Tensor Dataset::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= size(), "dataset slice out of range");
  const std::size_t w = width();
  Tensor out({end - begin, w});
  std::copy_n(inputs.data() + begin * w, (end - begin) * w, out.data());
  return out;
}

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at, const std::string& path) {
  if (at + 4 > b.size()) fail("truncated IDX header in '" + path + "'");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);
  const std::uint32_t im_magic = be32(img, 0, images_path);
  if (im_magic != 0x00000803u) fail("wrong magic in '" + images_path + "': expected 0x00000803");
  const std::uint32_t lb_magic = be32(lab, 0, labels_path);
  if (lb_magic != 0x00000801u) fail("wrong magic in '" + labels_path + "': expected 0x00000801");
  const std::size_t n = be32(img, 4, images_path), rows = be32(img, 8, images_path), cols = be32(img, 12, images_path);
  const std::size_t nl = be32(lab, 4, labels_path);
  if (n != nl) fail("image count " + std::to_string(n) + " does not match label count " + std::to_string(nl));
  const std::size_t px = rows * cols;
  if (img.size() < 16 + n * px) fail("truncated payload in '" + images_path + "'");
  if (lab.size() < 8 + n) fail("truncated payload in '" + labels_path + "'");

  Dataset d;
  d.inputs = Tensor({n, px});
  for (std::size_t i = 0; i < n * px; ++i) d.inputs[i] = static_cast<float>(img[16 + i]) / 255.0f;
  d.labels.resize(n);
  int mx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = lab[8 + i];
    mx = std::max(mx, d.labels[i]);
  }
  d.classes = static_cast<std::size_t>(mx) + 1;
  return d;
}

namespace {

Dataset take(Dataset d, std::size_t limit) {
  if (limit == 0 || limit >= d.size()) return d;
  Dataset out;
  out.inputs = d.slice(0, limit);
  out.labels.assign(d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(limit));
  out.classes = d.classes;
  return out;
}

void normalize(Dataset& d, double mean, double stddev) {
  for (float& v : d.inputs.span()) v = static_cast<float>((v - mean) / stddev);
}

constexpr std::uint64_t kValOffset = 0x5bd1e995u;

}  // namespace

Dataset make_blobs(const DatasetSpec& spec, std::size_t count, std::uint64_t stream_seed) {
  // Centers depend only on data_seed, so train and val share the mixture.
  Rng centers_rng = Rng::substream(spec.data_seed, Stream::kData);
  const std::size_t k = spec.classes * spec.clusters_per_class;
  std::vector<double> centers(k * spec.dim);
  for (std::size_t c = 0; c < k; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const double v = centers_rng.normal();
      centers[c * spec.dim + j] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < spec.dim; ++j) centers[c * spec.dim + j] *= spec.separation / norm;
  }

  Rng rng(stream_seed);
  Dataset d;
  d.classes = spec.classes;
  d.inputs = Tensor({count, spec.dim});
  d.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t cluster = rng.below(k);
    int label = static_cast<int>(cluster / spec.clusters_per_class);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      d.inputs[i * spec.dim + j] = static_cast<float>(centers[cluster * spec.dim + j] + spec.noise * rng.normal());
    }
    if (spec.label_noise > 0.0 && rng.uniform() < spec.label_noise) label = static_cast<int>(rng.below(spec.classes));
    d.labels[i] = label;
  }
  return d;
}

Dataset make_sequences(const DatasetSpec& spec, std::size_t count, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  Dataset d;
  d.classes = spec.classes;
  d.inputs = Tensor({count, spec.length});
  d.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t upper = 0, zeros = 0;
    for (std::size_t t = 0; t < spec.length; ++t) {
      const std::size_t tok = rng.below(spec.vocab);
      d.inputs[i * spec.length + t] = static_cast<float>(tok);
      upper += tok >= spec.vocab / 2;
      zeros += tok == 0;
    }
    int label = 0;
    if (spec.rule == "majority") {
      label = 2 * upper > spec.length ? 1 : 0;
    } else if (spec.rule == "first_token_mod") {
      label = static_cast<int>(static_cast<std::size_t>(d.inputs[i * spec.length]) % spec.classes);
    } else if (spec.rule == "count_threshold") {
      label = zeros >= spec.threshold ? 1 : 0;
    } else {
      throw ConfigError("unknown sequence rule '" + spec.rule + "'");
    }
    d.labels[i] = label;
  }
  return d;
}

void permute_labels(Dataset& d, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, Stream::kHead);
  const auto perm = rng.permutation(d.classes);
  for (int& y : d.labels) y = static_cast<int>(perm[static_cast<std::size_t>(y)]);
}

DataSplits make_dataset(const DatasetSpec& spec) {
  DataSplits s;
  switch (spec.kind) {
    case DatasetKind::kIdx: {
      s.train = take(load_idx(spec.train_images, spec.train_labels), spec.train_limit);
      s.val = take(load_idx(spec.val_images, spec.val_labels), spec.val_limit);
      s.train.classes = s.val.classes = std::max({s.train.classes, s.val.classes, spec.classes});
      normalize(s.train, spec.mean, spec.stddev);
      normalize(s.val, spec.mean, spec.stddev);
      break;
    }
    case DatasetKind::kBlobs: {
      const std::uint64_t base = Rng::substream(spec.data_seed, Stream::kData).next_u64();
      s.train = make_blobs(spec, spec.train_size, base);
      s.val = make_blobs(spec, spec.val_size, base + kValOffset);
      break;
    }
    case DatasetKind::kSequences: {
      const std::uint64_t base = Rng::substream(spec.data_seed, Stream::kData).next_u64();
      s.train = make_sequences(spec, spec.train_size, base);
      s.val = make_sequences(spec, spec.val_size, base + kValOffset);
      break;
    }
  }
  if (spec.label_permutation) {
    permute_labels(s.train, *spec.label_permutation);
    permute_labels(s.val, *spec.label_permutation);
  }
  return s;
}

}  // namespace sparselab::runner
