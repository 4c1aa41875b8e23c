// Copyright 2026 The molct Authors.
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

#ifndef MOLCT_GRAPH_HPP
#define MOLCT_GRAPH_HPP

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "molct/tensor.hpp"

namespace molct::ad {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Op : std::uint8_t {
  leaf,      // trainable input (gets a gradient)
  constant,  // fixed input (no gradient)
  add,
  sub,
  mul,  // elementwise
  matmul,
  transpose,
  scale,       // x * c
  add_scalar,  // x + c
  exp,
  log,
  sqrt,
  sin,
  cos,
  sigmoid,
  softplus,
  reciprocal,
  min_scalar,  // elementwise min(x, c); subgradient 0 where x >= c
  sum_all,     // NxM -> 1x1
  sum_cols,    // NxM -> Nx1
  sum_rows,    // NxM -> 1xM
  bcast_cols,  // Nx1 -> NxM
  bcast_rows,  // 1xM -> NxM
  row_max,     // NxM -> Nx1 (first argmax subgradient)
  gather_rows,
  scatter_rows,
  slice_rows,
  embed_rows,  // place rows at an offset inside a zero matrix
  slice_cols,
  embed_cols,
};

// Eagerly evaluated computation tape. Node values are computed at insertion;
// backward() appends the gradient computation to the same tape, so gradients
// are themselves differentiable (needed for the force term of the loss, which
// contains an input gradient).
class Graph {
 public:
  struct Node {
    Op op;
    NodeId a = kNoNode;
    NodeId b = kNoNode;
    bool needs_grad = false;
    int param_id = -1;   // caller tag for leaves, -1 otherwise
    double scalar = 0.0; // payload of scale/add_scalar/min_scalar
    std::uint32_t i0 = 0, i1 = 0;  // slice bounds / broadcast extents
    std::shared_ptr<const std::vector<std::uint32_t>> indices;  // gather/scatter/argmax
    Tensor value;
  };

  // Leaves.
  NodeId leaf(Tensor value, int param_id = -1);
  NodeId constant(Tensor value);

  // Primitives. Shapes are validated; every op registers a backward rule.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId sin(NodeId a);
  NodeId cos(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId softplus(NodeId a);
  NodeId reciprocal(NodeId a);
  NodeId min_scalar(NodeId a, double c);
  NodeId sum_all(NodeId a);
  NodeId sum_cols(NodeId a);
  NodeId sum_rows(NodeId a);
  NodeId bcast_cols(NodeId a, std::size_t m);
  NodeId bcast_rows(NodeId a, std::size_t n);
  NodeId row_max(NodeId a);
  NodeId gather_rows(NodeId table, std::vector<std::uint32_t> idx);
  NodeId scatter_rows(NodeId a, std::vector<std::uint32_t> idx,
                      std::size_t out_rows);
  NodeId slice_rows(NodeId a, std::size_t r0, std::size_t r1);
  NodeId embed_rows(NodeId a, std::size_t r0, std::size_t out_rows);
  NodeId slice_cols(NodeId a, std::size_t c0, std::size_t c1);
  NodeId embed_cols(NodeId a, std::size_t c0, std::size_t out_cols);

  // Composites built from primitives (exactly differentiable to any order).
  NodeId softmax_rows(NodeId a);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId square(NodeId a) { return mul(a, a); }
  NodeId neg(NodeId a) { return scale(a, -1.0); }
  NodeId mean_all(NodeId a);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }

  // Reverse-mode sweep from a scalar output. Returns, for every node id that
  // existed at call time, the id of its gradient node (kNoNode where the
  // output does not depend on it or it needs no gradient). Gradient nodes are
  // ordinary nodes: calling backward() again on a scalar formed from them
  // yields exact second-order derivatives.
  std::vector<NodeId> backward(NodeId output);

  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  NodeId push(Node n);
  NodeId unary(Op op, NodeId a);
  NodeId binary(Op op, NodeId a, NodeId b);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
};

}  // namespace molct::ad

#endif  // MOLCT_GRAPH_HPP
