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

#include "sparselab/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "sparselab/kernels/dispatch.hpp"

namespace sparselab::nn::ops {

namespace {

template <class T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < src.numel(); ++i) d[i] += s[i];
}

}  // namespace

template <class T>
Var linear(Tape<T>& t, Var x, Var w, Var b) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  require(xv.rank() == 2 && wv.rank() == 2, "linear expects rank-2 input and weight");
  const std::size_t n = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  require(wv.dim(1) == in, "linear: input width " + std::to_string(in) + " does not match weight " +
                               shape_str(wv.shape()));
  require(t.value(b).numel() == out, "linear: bias length mismatch");
  BasicTensor<T> y({n, out});
  kernels::gemm_nt(n, out, in, xv.data(), wv.data(), y.data());
  kernels::add_row_vector(n, out, t.value(b).data(), y.data());
  return t.push(std::move(y), {x.id, w.id, b.id}, [x, w, b, n, in, out](Tape<T>& tp, std::size_t self) {
    const auto& dy = tp.grad(self);
    if (tp.requires_grad(x))
      kernels::gemm_nn(n, in, out, dy.data(), tp.value(w).data(), tp.grad_buffer(x.id).data());
    if (tp.requires_grad(w))
      kernels::gemm_tn(out, in, n, dy.data(), tp.value(x).data(), tp.grad_buffer(w.id).data());
    if (tp.requires_grad(b))
      kernels::accumulate_column_sums(n, out, dy.data(), tp.grad_buffer(b.id).data());
  });
}

template <class T>
Var relu(Tape<T>& t, Var x) {
  const auto& xv = t.value(x);
  BasicTensor<T> y(xv.shape());
  kernels::relu_forward(xv.numel(), xv.data(), y.data());
  return t.push(std::move(y), {x.id}, [x](Tape<T>& tp, std::size_t self) {
    const auto& dy = tp.grad(self);
    kernels::relu_backward(dy.numel(), tp.value(x).data(), dy.data(), tp.grad_buffer(x.id).data());
  });
}

template <class T>
Var add(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require(av.shape() == bv.shape(), "add: shape mismatch " + shape_str(av.shape()) + " vs " +
                                        shape_str(bv.shape()));
  BasicTensor<T> y = av;
  add_into(y, bv);
  return t.push(std::move(y), {a.id, b.id}, [a, b](Tape<T>& tp, std::size_t self) {
    const auto& dy = tp.grad(self);
    if (tp.requires_grad(a)) add_into(tp.grad_buffer(a.id), dy);
    if (tp.requires_grad(b)) add_into(tp.grad_buffer(b.id), dy);
  });
}

template <class T>
Var reshape(Tape<T>& t, Var x, Shape shape) {
  BasicTensor<T> y = t.value(x).reshaped(std::move(shape));
  return t.push(std::move(y), {x.id}, [x](Tape<T>& tp, std::size_t self) {
    const auto& dy = tp.grad(self);
    T* dx = tp.grad_buffer(x.id).data();
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] += dy[i];
  });
}

namespace {

// cols[(c*9 + kh*3 + kw), oh*W + ow] for one sample.
template <class T>
void im2col3x3(const T* x, std::size_t c, std::size_t h, std::size_t w, T* cols) {
  const std::size_t hw = h * w;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t kh = 0; kh < 3; ++kh)
      for (std::size_t kw = 0; kw < 3; ++kw) {
        T* row = cols + (ch * 9 + kh * 3 + kw) * hw;
        for (std::size_t oh = 0; oh < h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) - 1;
          for (std::size_t ow = 0; ow < w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + kw) - 1;
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(h) &&
                                iw < static_cast<std::ptrdiff_t>(w);
            row[oh * w + ow] = inside ? x[(ch * h + ih) * w + iw] : T{0};
          }
        }
      }
}

template <class T>
void col2im3x3(const T* cols, std::size_t c, std::size_t h, std::size_t w, T* dx) {
  const std::size_t hw = h * w;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t kh = 0; kh < 3; ++kh)
      for (std::size_t kw = 0; kw < 3; ++kw) {
        const T* row = cols + (ch * 9 + kh * 3 + kw) * hw;
        for (std::size_t oh = 0; oh < h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) - 1;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ow = 0; ow < w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + kw) - 1;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
            dx[(ch * h + ih) * w + iw] += row[oh * w + ow];
          }
        }
      }
}

}  // namespace

template <class T>
Var conv3x3(Tape<T>& t, Var x, Var w, Var b) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  require(xv.rank() == 4, "conv3x3 expects input (N, C, H, W)");
  require(wv.rank() == 4 && wv.dim(2) == 3 && wv.dim(3) == 3, "conv3x3 expects weight (O, C, 3, 3)");
  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), wd = xv.dim(3), o = wv.dim(0);
  require(wv.dim(1) == c, "conv3x3: channel mismatch");
  require(t.value(b).numel() == o, "conv3x3: bias length mismatch");
  const std::size_t hw = h * wd, ckk = c * 9;
  BasicTensor<T> y({n, o, h, wd});
  std::vector<T> cols(ckk * hw);
  const T* bias = t.value(b).data();
  for (std::size_t s = 0; s < n; ++s) {
    im2col3x3(xv.data() + s * c * hw, c, h, wd, cols.data());
    T* ys = y.data() + s * o * hw;
    for (std::size_t oc = 0; oc < o; ++oc) std::fill(ys + oc * hw, ys + (oc + 1) * hw, bias[oc]);
    kernels::gemm_nn(o, hw, ckk, wv.data(), cols.data(), ys);
  }
  return t.push(std::move(y), {x.id, w.id, b.id},
                [x, w, b, n, c, h, wd, o, hw, ckk](Tape<T>& tp, std::size_t self) {
                  const auto& dy = tp.grad(self);
                  const bool gx = tp.requires_grad(x), gw = tp.requires_grad(w), gb = tp.requires_grad(b);
                  std::vector<T> cols(ckk * hw), dcols;
                  if (gx) dcols.resize(ckk * hw);
                  for (std::size_t s = 0; s < n; ++s) {
                    const T* dys = dy.data() + s * o * hw;
                    if (gw) {
                      im2col3x3(tp.value(x).data() + s * c * hw, c, h, wd, cols.data());
                      kernels::gemm_nt(o, ckk, hw, dys, cols.data(), tp.grad_buffer(w.id).data());
                    }
                    if (gb) {
                      T* db = tp.grad_buffer(b.id).data();
                      for (std::size_t oc = 0; oc < o; ++oc) {
                        T acc = db[oc];
                        for (std::size_t i = 0; i < hw; ++i) acc += dys[oc * hw + i];
                        db[oc] = acc;
                      }
                    }
                    if (gx) {
                      std::fill(dcols.begin(), dcols.end(), T{0});
                      kernels::gemm_tn(ckk, hw, o, tp.value(w).data(), dys, dcols.data());
                      col2im3x3(dcols.data(), c, h, wd, tp.grad_buffer(x.id).data() + s * c * hw);
                    }
                  }
                });
}

template <class T>
Var maxpool2(Tape<T>& t, Var x) {
  const auto& xv = t.value(x);
  require(xv.rank() == 4, "maxpool2 expects (N, C, H, W)");
  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  require(oh > 0 && ow > 0, "maxpool2: spatial dims too small");
  BasicTensor<T> y({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.numel());
  std::size_t out = 0;
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* plane = xv.data() + p * h * w;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j, ++out) {
        std::size_t best = (2 * i) * w + 2 * j;
        const std::size_t cand[3] = {(2 * i) * w + 2 * j + 1, (2 * i + 1) * w + 2 * j,
                                     (2 * i + 1) * w + 2 * j + 1};
        for (std::size_t q : cand)
          if (plane[q] > plane[best]) best = q;
        y[out] = plane[best];
        (*argmax)[out] = p * h * w + best;
      }
  }
  return t.push(std::move(y), {x.id}, [x, argmax](Tape<T>& tp, std::size_t self) {
    const auto& dy = tp.grad(self);
    T* dx = tp.grad_buffer(x.id).data();
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[(*argmax)[i]] += dy[i];
  });
}

template <class T>
Var layer_norm(Tape<T>& t, Var x, Var gamma, Var beta, double eps) {
  const auto& xv = t.value(x);
  require(xv.rank() == 2, "layer_norm expects rank-2 input");
  const std::size_t rows = xv.dim(0), d = xv.dim(1);
  require(t.value(gamma).numel() == d && t.value(beta).numel() == d, "layer_norm: parameter length");
  auto xhat = std::make_shared<BasicTensor<T>>(xv.shape());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  BasicTensor<T> y(xv.shape());
  const T* g = t.value(gamma).data();
  const T* bt = t.value(beta).data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * d;
    T mean{0};
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(d);
    const T rs = T{1} / std::sqrt(var + static_cast<T>(eps));
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = (xr[j] - mean) * rs;
      (*xhat)[r * d + j] = xh;
      y[r * d + j] = xh * g[j] + bt[j];
    }
  }
  return t.push(std::move(y), {x.id, gamma.id, beta.id},
                [x, gamma, beta, rows, d, xhat, rstd](Tape<T>& tp, std::size_t self) {
                  const auto& dy = tp.grad(self);
                  const T* g = tp.value(gamma).data();
                  if (tp.requires_grad(gamma)) {
                    T* dg = tp.grad_buffer(gamma.id).data();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) dg[j] += dy[r * d + j] * (*xhat)[r * d + j];
                  }
                  if (tp.requires_grad(beta))
                    kernels::accumulate_column_sums(rows, d, dy.data(), tp.grad_buffer(beta.id).data());
                  if (!tp.requires_grad(x)) return;
                  T* dx = tp.grad_buffer(x.id).data();
                  std::vector<T> dxh(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    T mean_dxh{0}, mean_dxh_xh{0};
                    for (std::size_t j = 0; j < d; ++j) {
                      dxh[j] = dy[r * d + j] * g[j];
                      mean_dxh += dxh[j];
                      mean_dxh_xh += dxh[j] * (*xhat)[r * d + j];
                    }
                    mean_dxh /= static_cast<T>(d);
                    mean_dxh_xh /= static_cast<T>(d);
                    for (std::size_t j = 0; j < d; ++j)
                      dx[r * d + j] += (*rstd)[r] * (dxh[j] - mean_dxh - (*xhat)[r * d + j] * mean_dxh_xh);
                  }
                });
}

template <class T>
Var embed(Tape<T>& t, const BasicTensor<T>& tokens, Var table, Var positions) {
  require(tokens.rank() == 2, "embed expects tokens (N, L)");
  const auto& tab = t.value(table);
  const auto& pos = t.value(positions);
  const std::size_t n = tokens.dim(0), len = tokens.dim(1), vocab = tab.dim(0), d = tab.dim(1);
  require(len >= 1 && len <= pos.dim(0), "embed: sequence length " + std::to_string(len) +
                                             " outside [1, " + std::to_string(pos.dim(0)) + "]");
  require(pos.dim(1) == d, "embed: position table width mismatch");
  auto ids = std::make_shared<std::vector<std::size_t>>(n * len);
  BasicTensor<T> y({n * len, d});
  for (std::size_t r = 0; r < n * len; ++r) {
    const T raw = tokens[r];
    const auto id = static_cast<long long>(raw);
    require(static_cast<T>(id) == raw && id >= 0 && static_cast<std::size_t>(id) < vocab,
            "embed: token id out of range");
    (*ids)[r] = static_cast<std::size_t>(id);
    const std::size_t l = r % len;
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] = tab[(*ids)[r] * d + j] + pos[l * d + j];
  }
  return t.push(std::move(y), {table.id, positions.id},
                [table, positions, ids, len, d](Tape<T>& tp, std::size_t self) {
                  const auto& dy = tp.grad(self);
                  const std::size_t rows = ids->size();
                  if (tp.requires_grad(table)) {
                    T* dt = tp.grad_buffer(table.id).data();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) dt[(*ids)[r] * d + j] += dy[r * d + j];
                  }
                  if (tp.requires_grad(positions)) {
                    T* dp = tp.grad_buffer(positions.id).data();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) dp[(r % len) * d + j] += dy[r * d + j];
                  }
                });
}

template <class T>
Var attention(Tape<T>& t, Var q, Var k, Var v, std::size_t seqs, std::size_t len) {
  const auto& qv = t.value(q);
  require(qv.rank() == 2 && qv.dim(0) == seqs * len, "attention: q must be (seqs*len, D)");
  require(t.value(k).shape() == qv.shape() && t.value(v).shape() == qv.shape(),
          "attention: q, k, v shapes differ");
  const std::size_t d = qv.dim(1);
  const T scale = T{1} / std::sqrt(static_cast<T>(d));
  auto probs = std::make_shared<std::vector<T>>(seqs * len * len);
  BasicTensor<T> y({seqs * len, d});
  for (std::size_t s = 0; s < seqs; ++s) {
    const T* qs = qv.data() + s * len * d;
    const T* ks = t.value(k).data() + s * len * d;
    const T* vs = t.value(v).data() + s * len * d;
    T* p = probs->data() + s * len * len;
    std::fill(p, p + len * len, T{0});
    kernels::gemm_nt(len, len, d, qs, ks, p);
    for (std::size_t i = 0; i < len; ++i) {
      T* row = p + i * len;
      T mx = row[0] * scale;
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, row[j] * scale);
      T sum{0};
      for (std::size_t j = 0; j < len; ++j) {
        row[j] = std::exp(row[j] * scale - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < len; ++j) row[j] /= sum;
    }
    kernels::gemm_nn(len, d, len, p, vs, y.data() + s * len * d);
  }
  return t.push(std::move(y), {q.id, k.id, v.id},
                [q, k, v, seqs, len, d, scale, probs](Tape<T>& tp, std::size_t self) {
                  const auto& dy = tp.grad(self);
                  std::vector<T> dp(len * len);
                  for (std::size_t s = 0; s < seqs; ++s) {
                    const std::size_t off = s * len * d;
                    const T* p = probs->data() + s * len * len;
                    const T* dys = dy.data() + off;
                    if (tp.requires_grad(v))
                      kernels::gemm_tn(len, d, len, p, dys, tp.grad_buffer(v.id).data() + off);
                    if (!tp.requires_grad(q) && !tp.requires_grad(k)) continue;
                    std::fill(dp.begin(), dp.end(), T{0});
                    kernels::gemm_nt(len, len, d, dys, tp.value(v).data() + off, dp.data());
                    for (std::size_t i = 0; i < len; ++i) {
                      T dot{0};
                      for (std::size_t j = 0; j < len; ++j) dot += dp[i * len + j] * p[i * len + j];
                      for (std::size_t j = 0; j < len; ++j)
                        dp[i * len + j] = p[i * len + j] * (dp[i * len + j] - dot) * scale;
                    }
                    if (tp.requires_grad(q))
                      kernels::gemm_nn(len, d, len, dp.data(), tp.value(k).data() + off,
                                       tp.grad_buffer(q.id).data() + off);
                    if (tp.requires_grad(k))
                      kernels::gemm_tn(len, d, len, dp.data(), tp.value(q).data() + off,
                                       tp.grad_buffer(k.id).data() + off);
                  }
                });
}

template <class T>
Var mean_pool(Tape<T>& t, Var x, std::size_t seqs, std::size_t len) {
  const auto& xv = t.value(x);
  require(xv.rank() == 2 && xv.dim(0) == seqs * len, "mean_pool: shape mismatch");
  const std::size_t d = xv.dim(1);
  BasicTensor<T> y({seqs, d});
  const T inv = T{1} / static_cast<T>(len);
  for (std::size_t s = 0; s < seqs; ++s)
    for (std::size_t j = 0; j < d; ++j) {
      T acc{0};
      for (std::size_t l = 0; l < len; ++l) acc += xv[(s * len + l) * d + j];
      y[s * d + j] = acc * inv;
    }
  return t.push(std::move(y), {x.id}, [x, seqs, len, d, inv](Tape<T>& tp, std::size_t self) {
    const auto& dy = tp.grad(self);
    T* dx = tp.grad_buffer(x.id).data();
    for (std::size_t s = 0; s < seqs; ++s)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t j = 0; j < d; ++j) dx[(s * len + l) * d + j] += dy[s * d + j] * inv;
  });
}

template <class T>
Var dropout(Tape<T>& t, Var x, double p, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout probability must be in [0, 1)");
  if (p == 0.0) return x;
  const auto& xv = t.value(x);
  auto keep = std::make_shared<std::vector<T>>(xv.numel());
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    (*keep)[i] = rng.uniform() >= p ? scale : T{0};
    y[i] = xv[i] * (*keep)[i];
  }
  return t.push(std::move(y), {x.id}, [x, keep](Tape<T>& tp, std::size_t self) {
    const auto& dy = tp.grad(self);
    T* dx = tp.grad_buffer(x.id).data();
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] += dy[i] * (*keep)[i];
  });
}

template <class T>
Var cross_entropy(Tape<T>& t, Var logits, std::span<const int> labels, double eps) {
  const auto& z = t.value(logits);
  require(z.rank() == 2, "cross_entropy expects logits (N, C)");
  const std::size_t n = z.dim(0), c = z.dim(1);
  require(labels.size() == n, "cross_entropy: label count mismatch");
  require(c >= 2, "cross_entropy: need at least two classes");
  require(eps >= 0.0 && eps < 1.0, "label smoothing must be in [0, 1)");
  auto dz = std::make_shared<BasicTensor<T>>(z.shape());
  double total = 0.0;
  std::vector<double> p(c);
  for (std::size_t r = 0; r < n; ++r) {
    const int label = labels[r];
    require(label >= 0 && static_cast<std::size_t>(label) < c, "cross_entropy: label out of range");
    const T* zr = z.data() + r * c;
    double mx = zr[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(zr[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(zr[j]) - mx);
    const double lse = mx + std::log(sum);
    double row = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double q = (static_cast<std::size_t>(label) == j ? 1.0 - eps : 0.0) + eps / static_cast<double>(c);
      const double logp = static_cast<double>(zr[j]) - lse;
      p[j] = std::exp(logp);
      if (q != 0.0) row -= q * logp;
      (*dz)[r * c + j] = static_cast<T>((p[j] - q) / static_cast<double>(n));
    }
    total += row;
  }
  const double mean = total / static_cast<double>(n);
  require(std::isfinite(mean), "non-finite loss");
  BasicTensor<T> y({1}, std::vector<T>{static_cast<T>(mean)});
  return t.push(std::move(y), {logits.id}, [logits, dz](Tape<T>& tp, std::size_t self) {
    const T g = tp.grad(self)[0];
    T* dl = tp.grad_buffer(logits.id).data();
    for (std::size_t i = 0; i < dz->numel(); ++i) dl[i] += g * (*dz)[i];
  });
}

#define SPARSELAB_INSTANTIATE_OPS(T)                                                      \
  template Var linear<T>(Tape<T>&, Var, Var, Var);                                        \
  template Var relu<T>(Tape<T>&, Var);                                                    \
  template Var add<T>(Tape<T>&, Var, Var);                                                \
  template Var reshape<T>(Tape<T>&, Var, Shape);                                          \
  template Var conv3x3<T>(Tape<T>&, Var, Var, Var);                                       \
  template Var maxpool2<T>(Tape<T>&, Var);                                                \
  template Var layer_norm<T>(Tape<T>&, Var, Var, Var, double);                            \
  template Var embed<T>(Tape<T>&, const BasicTensor<T>&, Var, Var);                       \
  template Var attention<T>(Tape<T>&, Var, Var, Var, std::size_t, std::size_t);           \
  template Var mean_pool<T>(Tape<T>&, Var, std::size_t, std::size_t);                     \
  template Var dropout<T>(Tape<T>&, Var, double, Rng&);                                   \
  template Var cross_entropy<T>(Tape<T>&, Var, std::span<const int>, double);

SPARSELAB_INSTANTIATE_OPS(float)
SPARSELAB_INSTANTIATE_OPS(double)

}  // namespace sparselab::nn::ops
