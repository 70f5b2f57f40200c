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

#include "sparselab/runner/training.hpp"

#include <cstdio>

#include "sparselab/core/error.hpp"

namespace sparselab::runner {

std::size_t steps_per_epoch(std::size_t examples, std::size_t batch_size) {
  require(batch_size > 0, "batch size must be positive");
  return (examples + batch_size - 1) / batch_size;
}

double train_epoch(nn::Model& model, optim::SgdState& state, const Dataset& data, const EpochArgs& args,
                   const StepLr& lr) {
  require(data.size() > 0, "empty training set");
  require(args.shuffle_rng != nullptr, "train_epoch needs a shuffle rng");
  const auto order = args.shuffle_rng->permutation(data.size());
  const std::size_t steps = steps_per_epoch(data.size(), args.batch_size);
  nn::ForwardMode mode{true, args.dropout_rng};
  std::vector<int> labels;
  double sum = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t b = s * args.batch_size;
    const std::size_t e = std::min(b + args.batch_size, data.size());
    const std::span<const std::size_t> rows(order.data() + b, e - b);
    const Tensor batch = data.gather(rows, &labels);
    const auto g = nn::grad(model, batch, labels, args.loss, mode);
    optim::sgd_step_lr(model.params, g.grads, state, lr(s));
    sum += g.loss;
  }
  return sum / static_cast<double>(steps);
}

diag::LogitSummary evaluate(const nn::Model& model, const Dataset& data, std::size_t batch_size) {
  diag::LogitAccumulator acc;
  for (std::size_t b = 0; b < data.size(); b += batch_size) {
    const std::size_t e = std::min(b + batch_size, data.size());
    acc.add(nn::forward(model, data.slice(b, e)),
            std::span<const int>(data.labels.data() + b, e - b));
  }
  return acc.summary();
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string metrics_csv(const std::vector<diag::MetricRow>& rows) {
  std::string out = kMetricsHeader;
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + ',' + r.split + ',' + format_number(r.top1) + ',' +
           format_number(r.mean_entropy) + ',' + format_number(r.mean_ce) + ',' + opt(r.uncertainty_fraction) +
           ',' + format_number(r.train_loss) + ',' + format_number(r.sparsity) + ',' +
           opt(r.channel_sparsity_avg) + ',' + format_number(r.flops_proportion) + '\n';
  }
  return out;
}

}  // namespace sparselab::runner
