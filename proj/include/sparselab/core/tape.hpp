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
#include <functional>
#include <vector>

#include "sparselab/core/tensor.hpp"

namespace sparselab::nn {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so the
/// reverse of insertion order is a valid topological order for backward.
template <class T>
class Tape {
 public:
  using TensorT = BasicTensor<T>;
  /// Propagates grad(self) into the parents' grads.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(TensorT value) { return push_node(std::move(value), {}, nullptr, false); }
  Var variable(TensorT value) { return push_node(std::move(value), {}, nullptr, true); }

  /// Appends an op result. It requires grad iff any parent does.
  Var push(TensorT value, std::vector<std::size_t> parents, Backward backward) {
    bool rg = false;
    for (std::size_t p : parents) rg = rg || nodes_[p].requires_grad;
    return push_node(std::move(value), std::move(parents), std::move(backward), rg);
  }

  const TensorT& value(Var v) const { return nodes_.at(v.id).value; }
  const TensorT& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulated by backward(); an empty tensor if none reached it.
  const TensorT& grad(Var v) const { return nodes_.at(v.id).grad; }
  const TensorT& grad(std::size_t id) const { return nodes_[id].grad; }

  /// Mutable gradient buffer, zero-allocated on first access.
  TensorT& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.numel() != n.value.numel() || n.grad.shape() != n.value.shape())
      n.grad = TensorT(n.value.shape());
    return n.grad;
  }

  /// Seeds d(out)/d(out) = 1 for a single-element output and runs backward.
  void backward(Var out) {
    require(nodes_.at(out.id).value.numel() == 1, "backward needs a scalar output");
    grad_buffer(out.id)[0] = T{1};
    for (std::size_t id = out.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
  };

  Var push_node(TensorT value, std::vector<std::size_t> parents, Backward backward, bool rg) {
    nodes_.push_back(Node{std::move(value), TensorT{}, std::move(parents), std::move(backward), rg});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace sparselab::nn
