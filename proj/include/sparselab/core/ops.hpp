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

#pragma once

#include <cstddef>
#include <span>

#include "sparselab/core/rng.hpp"
#include "sparselab/core/tape.hpp"

namespace sparselab::nn::ops {

// Differentiable building blocks for the model zoo. All ops take row-major
// tensors; batch-like leading dims are flattened by the caller where noted.

/// y[N,out] = x[N,in] * W[out,in]^T + b[out]
template <class T>
Var linear(Tape<T>& t, Var x, Var w, Var b);

template <class T>
Var relu(Tape<T>& t, Var x);

template <class T>
Var add(Tape<T>& t, Var a, Var b);

/// Same data, different shape.
template <class T>
Var reshape(Tape<T>& t, Var x, Shape shape);

/// 3x3 stride-1 convolution with zero padding 1. x[N,C,H,W], w[O,C,3,3], b[O].
template <class T>
Var conv3x3(Tape<T>& t, Var x, Var w, Var b);

/// 2x2 stride-2 max pooling; ties resolve to the first element in row-major order.
template <class T>
Var maxpool2(Tape<T>& t, Var x);

/// Row-wise layer normalization of x[R,D] with scale/shift of length D.
template <class T>
Var layer_norm(Tape<T>& t, Var x, Var gamma, Var beta, double eps = 1e-5);

/// tokens[N,L] hold integer ids stored as floats; returns table rows [N*L, D]
/// plus the position table rows pos[l] for l < L.
template <class T>
Var embed(Tape<T>& t, const BasicTensor<T>& tokens, Var table, Var positions);

/// Single-head softmax(QK^T/sqrt(D))V applied independently to each of the
/// `seqs` sequences of length `len`; q, k, v are [seqs*len, D].
template <class T>
Var attention(Tape<T>& t, Var q, Var k, Var v, std::size_t seqs, std::size_t len);

/// Mean over each sequence: [seqs*len, D] -> [seqs, D].
template <class T>
Var mean_pool(Tape<T>& t, Var x, std::size_t seqs, std::size_t len);

/// Inverted dropout with keep-probability 1-p.
template <class T>
Var dropout(Tape<T>& t, Var x, double p, Rng& rng);

/// Mean smoothed cross-entropy over rows of logits[N,C]; the target puts
/// (1-eps) on the label and eps/C on every class.
template <class T>
Var cross_entropy(Tape<T>& t, Var logits, std::span<const int> labels, double eps);

}  // namespace sparselab::nn::ops
