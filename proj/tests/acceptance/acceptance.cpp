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

// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 when any fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "sparselab/core/error.hpp"
#include "sparselab/core/loss.hpp"
#include "outcome.hpp"
#include "sparselab/diagnostics/metrics.hpp"
#include "sparselab/landscape/landscape.hpp"
#include "sparselab/runner/checkpoint.hpp"
#include "sparselab/runner/config.hpp"
#include "sparselab/runner/data.hpp"
#include "sparselab/runner/experiment.hpp"
#include "sparselab/runner/training.hpp"
#include "sparselab/sparsify/masks.hpp"
#include "sparselab/sparsify/rigl.hpp"
#include "sparselab/sparsify/schedules.hpp"
#include "sparselab/transfer/transfer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace sparselab;
using runner::Json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / ("sparselab_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t nnz(const Tensor& t) {
  return static_cast<std::size_t>(std::count_if(t.span().begin(), t.span().end(), [](float v) { return v != 0.0f; }));
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  struct Case {
    const char* name;
    nn::ModelSpec spec;
    double smoothing;
    double lift;
  };
  const std::vector<Case> zoo{{"mlp", sparselab::testing::tiny_mlp({6, 8, 5, 3}), 0.0, 1.0},
                              {"mlp-smoothed", sparselab::testing::tiny_mlp({4, 6, 3}), 0.1, 1.0},
                              {"micro-cnn", sparselab::testing::tiny_cnn(), 0.0, 1.0},
                              {"tiny-transformer", sparselab::testing::tiny_transformer(2), 0.1, 20.0}};
  Outcome o;
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& c : zoo) {
    const std::size_t n_params = [&] {
      std::size_t n = 0;
      for (const auto& p : nn::describe_params(c.spec)) n += Tensor(p.shape).numel();
      return n;
    }();
    if (n_params > 500) {
      o.pass = false;
      o.detail += std::string(c.name) + " exceeds 500 params; ";
    }
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Rng init(seed * 31 + checked);
      const nn::Model m = nn::make_model(c.spec, init);
      auto params = sparselab::testing::to_double(m.params);
      for (auto& p : params)
        for (double& v : p.span()) v *= c.lift;
      Rng data(seed);
      const auto x = sparselab::testing::random_inputs(c.spec, 3, data).cast<double>();
      const auto y = sparselab::testing::random_labels(3, c.spec.num_classes(), data);
      const double err = sparselab::testing::max_gradcheck_error(c.spec, params, x, y, c.smoothing);
      worst = std::max(worst, err);
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && worst <= 1e-3 && secs < 60.0;
  o.detail += std::to_string(checked) + " model instances, max rel err " + fmt("%.2e", worst) + " (limit 1e-3), " +
              fmt("%.1f", secs) + " s (limit 60 s)";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Schedule exactness

Outcome schedule_exactness() {
  Outcome o;
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t_end = 1.0 + 999.0 * rng.uniform();
    const double t = t_end * rng.uniform();
    const double alpha = rng.uniform();
    const double s_l = 0.99 * rng.uniform();
    const double expect = alpha / 2.0 * (1.0 + std::cos(std::numbers::pi * t / t_end)) * (1.0 - s_l);
    worst = std::max(worst, std::abs(sparsify::rigl_fraction(t, alpha, t_end, s_l) - expect));
  }
  const bool rigl_ok = worst <= 1e-12;

  bool gmp_ok = true;
  for (double s_f : {0.5, 0.8, 0.9, 0.95, 0.98}) {
    for (std::size_t every : {1u, 5u}) {
      sparsify::GmpSchedule g;
      g.final_sparsity = s_f;
      g.ramp_start = 10;
      g.ramp_end = 75;
      g.update_every = every;
      g.total = 100;
      gmp_ok &= sparsify::gmp_sparsity_at(g, 10.0) == 0.0;
      gmp_ok &= sparsify::gmp_sparsity_at(g, 75.0) == s_f;
      gmp_ok &= sparsify::gmp_sparsity_at(g, 100.0) == s_f;
      double prev = 0.0;
      for (int k = 0; k <= 10000; ++k) {
        const double s = sparsify::gmp_sparsity_at(g, 100.0 * k / 10000.0);
        gmp_ok &= s >= prev && s <= s_f;
        prev = s;
      }
    }
  }

  bool acdc_ok = true;
  for (std::size_t total : {100u, 250u, 500u, 1000u}) {
    const auto phases = sparsify::acdc_phases(sparsify::AcdcSchedule::standard(total, 0.95));
    std::size_t at = 0;
    for (const auto& p : phases) {
      acdc_ok &= p.start == at;
      at = p.end();
    }
    acdc_ok &= at == total && phases.back().kind == sparsify::PhaseKind::kCompressed;
  }
  // 100 epochs: warmup [0,10); 13 alternating 5-epoch phases over [10,75) starting and
  // ending compressed; D [75,90); C [90,100).
  std::vector<sparsify::Phase> expect{{sparsify::PhaseKind::kDenseWarmup, 0, 10}};
  for (std::size_t i = 0; i < 13; ++i)
    expect.push_back({i % 2 ? sparsify::PhaseKind::kDecompressed : sparsify::PhaseKind::kCompressed, 10 + 5 * i, 5});
  expect.push_back({sparsify::PhaseKind::kDecompressed, 75, 15});
  expect.push_back({sparsify::PhaseKind::kCompressed, 90, 10});
  const bool hundred_ok = sparsify::acdc_phases(sparsify::AcdcSchedule::standard(100, 0.95)) == expect;

  o.pass = rigl_ok && gmp_ok && acdc_ok && hundred_ok;
  o.detail = "rigl max abs err " + fmt("%.1e", worst) + (rigl_ok ? "" : " FAIL") + "; gmp endpoints/monotone " +
             (gmp_ok ? "ok" : "FAIL") + "; acdc totals " + (acdc_ok ? "ok" : "FAIL") + "; 100-epoch list " +
             (hundred_ok ? "ok" : "FAIL");
  return o;
}

// ---------------------------------------------------------------------------
// 3. Mask invariants

// Values with at most 12 significant bits so that scaling by an 8-bit factor is exact in f32.
Tensor coarse(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.span()) v = static_cast<float>(static_cast<double>(rng.below(4096)) - 2048.0) / 1024.0f;
  return t;
}

std::size_t kept_count(double s, std::size_t n) {
  const double k = (1.0 - s) * static_cast<double>(n);
  const double r = std::round(k);
  return static_cast<std::size_t>(std::abs(k - r) <= 1e-9 * std::max(1.0, k) ? r : std::floor(k));
}

Outcome mask_invariants() {
  Rng rng(333);
  std::size_t fails[5] = {0, 0, 0, 0, 0};
  const int trials = 2000;  // per property, 10 000 in total
  const sparsify::DistributionKind kinds[] = {sparsify::DistributionKind::kUniform, sparsify::DistributionKind::kGlobal,
                                              sparsify::DistributionKind::kErk,
                                              sparsify::DistributionKind::kBlock4Global};
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t layers = 1 + rng.below(4);
    std::vector<Tensor> ws;
    std::vector<Shape> shapes;
    for (std::size_t l = 0; l < layers; ++l) {
      shapes.push_back({2 + rng.below(20), 2 + rng.below(20)});
      ws.push_back(coarse(shapes.back(), rng));
    }
    std::vector<sparsify::LayerWeights> lw;
    for (std::size_t l = 0; l < layers; ++l) lw.push_back({"l" + std::to_string(l), &ws[l], nullptr});
    std::size_t total = 0;
    for (const auto& w : ws) total += w.numel();

    // (a) compression exactness
    {
      const auto kind = kinds[rng.below(4)];
      const double s = 0.95 * rng.uniform();
      const sparsify::SparsityDistribution dist{kind, s, {}};
      try {
        const auto m = sparsify::magnitude_mask(lw, dist);
        std::size_t kept = 0;
        for (const auto& t : m) kept += nnz(t);
        bool ok = true;
        if (kind == sparsify::DistributionKind::kUniform) {
          for (std::size_t l = 0; l < layers; ++l) ok &= nnz(m[l]) == kept_count(s, ws[l].numel());
        } else if (kind == sparsify::DistributionKind::kErk) {
          const auto d = sparsify::erk_densities(shapes, s);
          for (std::size_t l = 0; l < layers; ++l) ok &= nnz(m[l]) == kept_count(1.0 - d[l], ws[l].numel());
        } else {
          const std::size_t group = kind == sparsify::DistributionKind::kBlock4Global ? 4 : 1;
          const std::size_t target = kept_count(s, total);
          ok &= kept <= target + group - 1 && kept + group - 1 >= target;
        }
        fails[0] += !ok;
      } catch (const Error&) {
        // Layer collapse is a legitimate refusal only when some layer would keep nothing.
      }
    }
    // (b) GMP nesting: IoU equals the nnz ratio
    {
      const double s1 = 0.6 * rng.uniform(), s2 = s1 + (0.95 - s1) * rng.uniform();
      const auto m1 = sparsify::magnitude_mask(lw, {sparsify::DistributionKind::kGlobal, s1, {}});
      std::vector<sparsify::LayerWeights> nested = lw;
      for (std::size_t l = 0; l < layers; ++l) nested[l].eligible = &m1[l];
      try {
        const auto m2 = sparsify::magnitude_mask(nested, {sparsify::DistributionKind::kGlobal, s2, {}});
        std::size_t n1 = 0, n2 = 0;
        bool subset = true;
        for (std::size_t l = 0; l < layers; ++l) {
          n1 += nnz(m1[l]);
          n2 += nnz(m2[l]);
          for (std::size_t j = 0; j < m1[l].numel(); ++j) subset &= !(m2[l][j] != 0.0f && m1[l][j] == 0.0f);
        }
        const double ratio = static_cast<double>(n2) / static_cast<double>(n1);
        fails[1] += !(subset && std::abs(diag::mask_iou(m1, m2) - ratio) <= 1e-12);
      } catch (const Error&) {
      }
    }
    // (c) RigL per-layer count conservation
    {
      const Tensor& w = ws[0];
      Tensor g = coarse(w.shape(), rng);
      Tensor m(w.shape());
      for (float& v : m.span()) v = rng.uniform() < 0.3 ? 1.0f : 0.0f;
      Tensor wm = w;
      for (std::size_t j = 0; j < w.numel(); ++j) wm[j] *= m[j];
      const auto u = sparsify::rigl_step(wm, g, m, rng.uniform());
      fails[2] += nnz(u.mask) != nnz(m);
    }
    // (d) ERK budget within one weight
    {
      const double s = 0.05 + 0.9 * rng.uniform();
      const auto d = sparsify::erk_densities(shapes, s);
      double budget = 0.0;
      for (std::size_t l = 0; l < layers; ++l) budget += d[l] * static_cast<double>(ws[l].numel());
      fails[3] += std::abs(budget - (1.0 - s) * static_cast<double>(total)) > 1.0;
    }
    // (e) scale equivariance w -> c w
    {
      const auto kind = kinds[rng.below(4)];
      const double s = 0.9 * rng.uniform();
      const float c = static_cast<float>(1 + rng.below(255)) / 16.0f;
      std::vector<Tensor> scaled = ws;
      for (auto& t : scaled)
        for (float& v : t.span()) v *= c;
      std::vector<sparsify::LayerWeights> ls = lw;
      for (std::size_t l = 0; l < layers; ++l) ls[l].weights = &scaled[l];
      try {
        const auto a = sparsify::magnitude_mask(lw, {kind, s, {}});
        const auto b = sparsify::magnitude_mask(ls, {kind, s, {}});
        bool same = true;
        for (std::size_t l = 0; l < layers; ++l) same &= bit_identical(a[l], b[l]);
        fails[4] += !same;
      } catch (const Error&) {
      }
    }
  }
  Outcome o;
  const char* names[] = {"compression", "nesting", "rigl-count", "erk-budget", "scale"};
  std::size_t total_fail = 0;
  for (int i = 0; i < 5; ++i) {
    total_fail += fails[i];
    o.detail += std::string(names[i]) + " " + std::to_string(fails[i]) + "/" + std::to_string(trials) + " fail";
    if (i < 4) o.detail += ", ";
  }
  o.pass = total_fail == 0;
  return o;
}

// ---------------------------------------------------------------------------
// 4. Diagnostics oracles

Outcome diagnostics_oracles() {
  Rng rng(44);
  double worst[7] = {0, 0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 1000; ++i) {
    // entropy and cross-entropy, brute-force softmax in long double
    const std::size_t c = 2 + rng.below(20);
    std::vector<float> z(c);
    for (float& v : z) v = static_cast<float>(rng.uniform(-12.0, 12.0));
    long double den = 0.0L;
    for (float v : z) den += std::exp(static_cast<long double>(v));
    long double h = 0.0L;
    for (float v : z) {
      const long double p = std::exp(static_cast<long double>(v)) / den;
      if (p > 0) h -= p * std::log(p);
    }
    const int label = static_cast<int>(rng.below(c));
    const long double ce = -std::log(std::exp(static_cast<long double>(z[label])) / den);
    worst[0] = std::max(worst[0], std::abs(diag::entropy(z) - static_cast<double>(h)));
    worst[1] = std::max(worst[1], std::abs(nn::loss_ce(z, label) - static_cast<double>(ce)));

    // uncertainty fraction
    std::vector<float> b(1 + rng.below(64));
    for (float& v : b) v = static_cast<float>(rng.normal(0.0, 3.0));
    std::size_t unc = 0;
    for (float v : b) {
      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
      unc += p > 0.1 && p < 0.9;
    }
    worst[2] = std::max(worst[2], std::abs(diag::uncertainty_fraction(b) -
                                           static_cast<double>(unc) / static_cast<double>(b.size())));

    // IoU over random supports
    const std::size_t layers = 1 + rng.below(3);
    std::vector<Tensor> ma, mb;
    std::size_t inter = 0, uni = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t n = 1 + rng.below(40);
      Tensor x({n}), y({n});
      const double pa = rng.uniform(), pb = rng.uniform();
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = rng.uniform() < pa ? static_cast<float>(rng.normal()) : 0.0f;
        y[j] = rng.uniform() < pb ? 1.0f : 0.0f;
        inter += x[j] != 0.0f && y[j] != 0.0f;
        uni += x[j] != 0.0f || y[j] != 0.0f;
      }
      ma.push_back(x);
      mb.push_back(y);
    }
    const double iou = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
    worst[3] = std::max(worst[3], std::abs(diag::mask_iou(ma, mb) - iou));

    // channel sparsity and FLOPs on a random micro-CNN with random channel-zeroing masks
    nn::CnnSpec cs;
    cs.height = 2 + 2 * rng.below(3);
    cs.width = 2 + 2 * rng.below(3);
    cs.in_channels = 1 + rng.below(2);
    cs.conv1_channels = 1 + rng.below(6);
    cs.conv2_channels = 1 + rng.below(6);
    cs.classes = 2 + rng.below(3);
    Rng init(rng.next_u64());
    nn::Model m = nn::make_model({cs}, init);
    std::size_t zero_ch = 0, channels = 0;
    double dense_flops = 0.0, kept_flops = 0.0;
    for (std::size_t p = 0; p < m.params.size(); ++p) {
      auto& e = m.params[p];
      if (!e.info.prunable) continue;
      Tensor mask(e.value.shape());
      const bool conv = e.info.name.rfind("conv", 0) == 0;
      const std::size_t rows = e.value.dim(0), per_row = e.value.numel() / rows;
      for (std::size_t r = 0; r < rows; ++r) {
        const bool kill = rng.uniform() < 0.3;
        bool all_zero = true;
        for (std::size_t j = 0; j < per_row; ++j) {
          const bool keep = !kill && rng.uniform() < 0.7;
          mask[r * per_row + j] = keep ? 1.0f : 0.0f;
          all_zero &= !keep || e.value[r * per_row + j] == 0.0f;
        }
        if (conv) {
          ++channels;
          zero_ch += all_zero;
        }
      }
      m.params.set_mask(p, mask);
      // Output positions per example: every pixel for the same-padded convolutions, one for the head.
      const double positions = conv ? static_cast<double>(cs.height * cs.width) : 1.0;
      dense_flops += 2.0 * static_cast<double>(e.value.numel()) * positions;
      kept_flops += 2.0 * static_cast<double>(nnz(mask)) * positions;
    }
    worst[4] = std::max(worst[4], std::abs(diag::channel_sparsity(m.params).global() -
                                           static_cast<double>(zero_ch) / static_cast<double>(channels)));
    const auto fr = diag::flops(m.params);
    worst[5] = std::max(worst[5], std::abs(fr.proportion - kept_flops / dense_flops));
    worst[5] = std::max(worst[5], std::abs(fr.dense - dense_flops) / dense_flops);

    // AIE
    const std::size_t tasks = 1 + rng.below(12);
    std::vector<double> em(tasks), eb(tasks);
    double sum = 0.0;
    for (std::size_t t = 0; t < tasks; ++t) {
      eb[t] = rng.uniform(0.01, 0.9);
      em[t] = rng.uniform(0.01, 0.9);
      sum += (em[t] - eb[t]) / eb[t];
    }
    worst[6] = std::max(worst[6], std::abs(diag::aie(em, eb) - sum / static_cast<double>(tasks)));
  }
  Outcome o;
  const char* names[] = {"entropy", "ce", "uncertainty", "iou", "channel", "flops", "aie"};
  double w = 0.0;
  for (int i = 0; i < 7; ++i) {
    w = std::max(w, worst[i]);
    o.detail += std::string(names[i]) + " " + fmt("%.1e", worst[i]) + (i < 6 ? ", " : "");
  }
  o.pass = w <= 1e-6;
  o.detail = "1000 instances each, max abs err: " + o.detail;
  return o;
}

// ---------------------------------------------------------------------------
// 5. Sharpness oracle

/// Smallest distance of a hidden ReLU pre-activation from its kink, in units of
/// the largest perturbation a finite-difference probe of step eps can cause.
double kink_margin(const nn::ParamStore& p, const Tensor& x, double eps) {
  const Tensor& w = p[0].value;
  const Tensor& b = p[1].value;
  const std::size_t hidden = w.dim(0), in = w.dim(1);
  double margin = INFINITY;
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    double reach = 1.0;
    for (std::size_t i = 0; i < in; ++i) reach += std::abs(x[n * in + i]);
    for (std::size_t j = 0; j < hidden; ++j) {
      double pre = b[j];
      for (std::size_t i = 0; i < in; ++i) pre += static_cast<double>(w[j * in + i]) * x[n * in + i];
      margin = std::min(margin, std::abs(pre) / (eps * reach));
    }
  }
  return margin;
}

Eigen::MatrixXd fd_hessian(const landscape::GradientOracle& oracle, const std::vector<double>& w, double h) {
  const std::size_t n = w.size();
  Eigen::MatrixXd H(n, n);
  std::vector<double> wp = w, wm = w, gp(n), gm(n);
  for (std::size_t j = 0; j < n; ++j) {
    wp[j] = w[j] + h;
    wm[j] = w[j] - h;
    oracle.loss_grad(wp, gp);
    oracle.loss_grad(wm, gm);
    for (std::size_t i = 0; i < n; ++i) H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (gp[i] - gm[i]) / (2 * h);
    wp[j] = wm[j] = w[j];
  }
  return 0.5 * (H + H.transpose());
}

Outcome sharpness_oracle() {
  const auto spec = sparselab::testing::tiny_mlp({4, 5, 3});
  Rng rng(555);
  std::size_t nets = 0, rejected = 0, ok_dense = 0, ok_masked = 0;
  double worst_dense = 0.0, worst_masked = 0.0;
  std::size_t params_count = 0;
  while (nets < 20) {
    Rng init(rng.next_u64());
    nn::Model m = nn::make_model(spec, init);
    params_count = m.params.total_params();
    const Tensor x = sparselab::testing::random_inputs(spec, 16, rng);
    const auto y = sparselab::testing::random_labels(16, 3, rng);
    // Half of each weight matrix masked for the restricted variant.
    nn::Model masked = m;
    for (std::size_t p = 0; p < masked.params.size(); ++p) {
      if (!masked.params[p].info.prunable) continue;
      Tensor mask(masked.params[p].value.shape());
      for (float& v : mask.span()) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
      masked.params.set_mask(p, mask);
    }
    const auto w = landscape::flatten(m.params);
    const auto wmask = landscape::flatten(masked.params);
    double maxw = 0.0;
    for (double v : w) maxw = std::max(maxw, std::abs(v));
    const double eps = 1e-3 * (1.0 + maxw);
    if (std::min(kink_margin(m.params, x, eps), kink_margin(masked.params, x, eps)) < 1.0) {
      ++rejected;
      continue;
    }
    ++nets;
    const landscape::ModelOracle oracle(spec, m.params, x, y);

    const auto H = fd_hessian(oracle, w, eps);
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
    const auto pi = landscape::power_iteration(oracle, w, {}, 20, nets);
    const double err = std::abs(pi.value - lmax) / std::abs(lmax);
    worst_dense = std::max(worst_dense, err);
    ok_dense += err <= 0.05;

    const auto support = landscape::mask_support(masked.params);
    const auto Hm = fd_hessian(oracle, wmask, eps);
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < support.size(); ++i)
      if (support[i] != 0.0) keep.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd sub(keep.size(), keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a)
      for (std::size_t b = 0; b < keep.size(); ++b)
        sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = Hm(keep[a], keep[b]);
    const double lsub = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sub).eigenvalues().maxCoeff();
    const auto pm = landscape::power_iteration(oracle, wmask, support, 20, nets);
    const double errm = std::abs(pm.value - lsub) / std::abs(lsub);
    worst_masked = std::max(worst_masked, errm);
    ok_masked += errm <= 0.05;
  }
  Outcome o;
  o.pass = ok_dense == 20 && ok_masked == 20 && params_count <= 60;
  o.detail = std::to_string(params_count) + "-param nets: dense " + std::to_string(ok_dense) + "/20 within 5% (worst " +
             fmt("%.2f%%", 100 * worst_dense) + "), masked " + std::to_string(ok_masked) + "/20 (worst " +
             fmt("%.2f%%", 100 * worst_masked) + "); " + std::to_string(rejected) +
             " draws rejected for ReLU kinks inside the probe radius";
  return o;
}

// ---------------------------------------------------------------------------
// 6. Interpolation contract

Json small_blobs(std::uint64_t seed) {
  Json j = Json::parse(R"({
    "model": {"arch": "mlp", "dims": [16, 12, 4]},
    "dataset": {"kind": "synthetic-blobs", "train_size": 128, "val_size": 64, "data_seed": 3,
                "classes": 4, "dim": 16, "clusters_per_class": 2, "separation": 3.0, "noise": 1.0},
    "method": "gmp", "target_sparsity": 0.8, "epochs": 6, "batch_size": 32,
    "gmp": {"ramp_end": 4, "update_every": 1},
    "optimizer": {"peak_lr": 0.1, "warmup_epochs": 1},
    "checkpoint": {"every": 2}
  })");
  j["seed"] = seed;
  return j;
}

Outcome interpolation_contract() {
  const auto cfg = runner::parse_experiment(small_blobs(6));
  const auto dir = work_dir() / "interp";
  const auto res = runner::run_experiment(cfg, dir.string());
  Outcome o;
  if (res.checkpoints.size() != 3) {
    o.pass = false;
    o.detail = "expected 3 checkpoints, got " + std::to_string(res.checkpoints.size());
    return o;
  }
  const auto data = runner::make_dataset(cfg.dataset);
  std::vector<nn::ParamStore> stores;
  std::vector<nn::Model> models;
  for (const auto& p : res.checkpoints) {
    models.push_back(runner::restore_model(runner::load_checkpoint(p)));
    stores.push_back(models.back().params);
  }
  auto eval_on = [&](const runner::Dataset& d) {
    return [&, spec = cfg.model](const nn::ParamStore& p) { return runner::evaluate(nn::Model{spec, p}, d, 1000).mean_ce; };
  };
  const auto rows = landscape::interpolate_path(stores, 10, {{"train", eval_on(data.train)}, {"val", eval_on(data.val)}});
  std::set<double> train_alphas, val_alphas;
  for (const auto& r : rows) (r.split == "train" ? train_alphas : val_alphas).insert(r.alpha);
  bool endpoints = true;
  for (std::size_t k = 0; k < 3; ++k) {
    const double alpha = static_cast<double>(k) / 2.0;
    const double tr = runner::evaluate(models[k], data.train, 1000).mean_ce;
    const double va = runner::evaluate(models[k], data.val, 1000).mean_ce;
    for (const auto& r : rows) {
      if (r.alpha != alpha) continue;
      endpoints &= r.loss == (r.split == "train" ? tr : va);
    }
  }
  const bool counts = rows.size() == 42 && train_alphas.size() == 21 && val_alphas.size() == 21;
  o.pass = counts && endpoints;
  o.detail = std::to_string(train_alphas.size()) + " train / " + std::to_string(val_alphas.size()) +
             " val alpha points (expect 21 each); checkpoint losses " +
             (endpoints ? "bit-equal to standalone evaluation" : "DIFFER from standalone evaluation");
  return o;
}

// ---------------------------------------------------------------------------
// 10. Transfer contracts

Outcome transfer_contracts() {
  const auto t0 = Clock::now();
  Json pre = Json::parse(R"({
    "seed": 4,
    "model": {"arch": "tiny-transformer", "vocab": 8, "max_seq_len": 8, "model_dim": 12, "blocks": 2,
              "mlp_hidden": 24, "classes": 2},
    "dataset": {"kind": "synthetic-sequences", "train_size": 256, "val_size": 128, "data_seed": 5,
                "rule": "majority", "vocab": 8, "length": 8},
    "method": "gmp", "distribution": "uniform", "target_sparsity": 0.8, "epochs": 6, "batch_size": 32,
    "gmp": {"ramp_end": 4, "update_every": 1},
    "optimizer": {"peak_lr": 0.05, "warmup_epochs": 1, "label_smoothing": 0.0},
    "checkpoint": {"enabled": false}
  })");
  const auto cfg = runner::parse_experiment(pre);
  const auto dir = work_dir() / "transfer";
  runner::run_experiment(cfg, dir.string());
  const nn::Model pretrained = runner::restore_model(runner::load_checkpoint((dir / "final.splb").string()));

  runner::DatasetSpec task_spec;
  task_spec.kind = runner::DatasetKind::kSequences;
  task_spec.rule = "first_token_mod";
  task_spec.classes = 3;
  task_spec.vocab = 8;
  task_spec.length = 8;
  task_spec.train_size = 192;
  task_spec.val_size = 128;
  task_spec.data_seed = 6;
  const auto task = runner::make_dataset(task_spec);
  const nn::Model start = transfer::attach_head(pretrained, 3, 8);

  transfer::TransferHyper hyper;
  hyper.lr = 0.05;
  hyper.batch_size = 16;
  hyper.early_stopping = false;
  hyper.seed = 9;
  const auto groups = transfer::layer_groups(start.spec);

  std::vector<std::string> problems;
  bool nesting = groups.blocks() == 2;
  for (std::size_t s = 0; s + 1 < groups.stages(); ++s) {
    const auto a = transfer::trainable_set(groups, s), b = transfer::trainable_set(groups, s + 1);
    nesting &= std::includes(b.begin(), b.end(), a.begin(), a.end()) && a.size() < b.size();
  }
  nesting &= transfer::trainable_set(groups, groups.stages() - 1).size() == start.params.size();
  if (!nesting) problems.push_back("nesting");

  // Stage prefixes: the model after k stages, diffed against the model after k - 1.
  transfer::TransferResult full;
  try {
    full = transfer::transfer_run(start, task, hyper);
  } catch (const std::exception& e) {
    return {false, std::string("transfer run failed: ") + e.what()};
  }
  nn::Model prev = start;
  bool isolation = true, rewind = true, masks = true, logged = full.stages.size() == groups.stages();
  for (std::size_t k = 1; k <= groups.stages(); ++k) {
    transfer::TransferHyper h = hyper;
    h.max_stages = k;
    const nn::Model cur = transfer::transfer_run(start, task, h).model;
    const auto allowed = transfer::trainable_set(groups, k - 1);
    for (std::size_t i = 0; i < cur.params.size(); ++i) {
      const auto& name = cur.params[i].info.name;
      if (!bit_identical(cur.params[i].value, prev.params[i].value) && !allowed.count(name)) isolation = false;
      const auto& a = start.params[i].mask;
      const auto& b = cur.params[i].mask;
      masks &= a.has_value() == b.has_value() && (!a || bit_identical(*a, *b));
    }
    prev = cur;
  }
  for (const auto& s : full.stages) {
    rewind &= s.lr_first == hyper.lr && s.lr_last == 0.0;
    logged &= std::isfinite(s.val_loss);
  }
  std::size_t masked_tensors = 0;
  for (const auto& e : start.params.entries()) masked_tensors += e.mask.has_value();
  if (masked_tensors == 0) problems.push_back("no sparse tensors to protect");
  if (!isolation) problems.push_back("stage isolation");
  if (!masks) problems.push_back("mask mutation");
  if (!rewind) problems.push_back("lr rewind");
  if (!logged) problems.push_back("stage log");
  const auto csv = transfer::stages_csv(full.stages);
  runner::write_file_atomic((dir / "stages.csv").string(), csv);

  Outcome o;
  o.pass = problems.empty();
  std::string losses;
  for (const auto& s : full.stages) losses += (losses.empty() ? "" : " ") + fmt("%.4f", s.val_loss);
  o.detail = std::to_string(full.stages.size()) + " stages (B=2), " + std::to_string(masked_tensors) +
             " masked tensors; per-stage val loss [" + losses + "]; " + fmt("%.1f s", seconds_since(t0));
  for (const auto& p : problems) o.detail += "; FAILED " + p;
  return o;
}

// ---------------------------------------------------------------------------
// 11. Persistence and determinism

Outcome persistence() {
  Json j = small_blobs(11);
  j["method"] = "rigl";
  j["rigl"] = {{"delta_t", 1}};
  const auto cfg = runner::parse_experiment(j);
  const auto a = work_dir() / "det_a", b = work_dir() / "det_b";
  const auto ra = runner::run_experiment(cfg, a.string());
  runner::run_experiment(cfg, b.string());
  const bool csv_same = slurp(a / "metrics.csv") == slurp(b / "metrics.csv") && !slurp(a / "metrics.csv").empty();
  bool ckpt_same = true;
  for (const auto& name : {"ckpt_e00001.splb", "ckpt_e00003.splb", "ckpt_e00005.splb", "final.splb"})
    ckpt_same &= slurp(a / name) == slurp(b / name);

  const auto original = runner::load_checkpoint((a / "final.splb").string());
  runner::save_checkpoint((a / "resaved.splb").string(), original);
  const auto back = runner::load_checkpoint((a / "resaved.splb").string());
  bool has_mask = false, has_momentum = false;
  for (const auto& t : original.tensors) {
    has_mask |= t.kind == runner::TensorKind::kMask;
    has_momentum |= t.kind == runner::TensorKind::kMomentum;
  }
  const bool round_trip = back == original && slurp(a / "resaved.splb") == slurp(a / "final.splb") && has_mask &&
                          has_momentum;
  optim::SgdState st;
  const auto restored = runner::restore_model(back, &st);
  bool weights_same = true;
  for (std::size_t i = 0; i < restored.params.size(); ++i)
    weights_same &= bit_identical(restored.params[i].value, ra.model.params[i].value);

  Outcome o;
  o.pass = csv_same && ckpt_same && round_trip && weights_same;
  o.detail = std::string("metrics.csv ") + (csv_same ? "byte-identical" : "DIFFERS") + " across seeded runs; checkpoints " +
             (ckpt_same ? "byte-identical" : "DIFFER") + "; round trip (weights+masks+momentum) " +
             (round_trip && weights_same ? "bit-exact" : "NOT exact");
  return o;
}

}  // namespace

// Criteria 7-9 (training trends) live in trends.cpp.
Outcome undertraining_trend();
Outcome mask_exploration_trend();
Outcome weight_decay_trend();

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> all{{1, "gradient correctness", gradient_correctness},
                                   {2, "schedule exactness", schedule_exactness},
                                   {3, "mask invariants", mask_invariants},
                                   {4, "diagnostics oracles", diagnostics_oracles},
                                   {5, "sharpness oracle", sharpness_oracle},
                                   {6, "interpolation contract", interpolation_contract},
                                   {7, "undertraining trend", undertraining_trend},
                                   {8, "mask-exploration trend", mask_exploration_trend},
                                   {9, "weight-decay trend", weight_decay_trend},
                                   {10, "transfer contracts", transfer_contracts},
                                   {11, "persistence and determinism", persistence}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  return failed ? 1 : 0;
}
