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

#include "molct/graph.hpp"

#include <cmath>
#include <string>

#include "molct/errors.hpp"

namespace molct::ad {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a,
                              const Tensor& b) {
  throw NumericError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
}

}  // namespace

void Graph::check(NodeId id) const {
  if (id >= nodes_.size())
    throw NumericError("graph: node id out of range");
}

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor value, int param_id) {
  Node n;
  n.op = Op::leaf;
  n.needs_grad = true;
  n.param_id = param_id;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::binary(Op op, NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const Tensor& x = nodes_[a].value;
  const Tensor& y = nodes_[b].value;
  switch (op) {
    case Op::add:
    case Op::sub:
    case Op::mul: {
      if (!x.same_shape(y))
        shape_error(op == Op::add ? "add" : op == Op::sub ? "sub" : "mul", x, y);
      Tensor out(x.rows(), x.cols());
      const std::size_t sz = x.size();
      if (op == Op::add)
        for (std::size_t i = 0; i < sz; ++i) out[i] = x[i] + y[i];
      else if (op == Op::sub)
        for (std::size_t i = 0; i < sz; ++i) out[i] = x[i] - y[i];
      else
        for (std::size_t i = 0; i < sz; ++i) out[i] = x[i] * y[i];
      n.value = std::move(out);
      break;
    }
    case Op::matmul: {
      if (x.cols() != y.rows()) shape_error("matmul", x, y);
      Tensor out(x.rows(), y.cols());
      const std::size_t m = x.rows(), k = x.cols(), p = y.cols();
      for (std::size_t i = 0; i < m; ++i) {
        const double* xrow = x.data() + i * k;
        double* orow = out.data() + i * p;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double xv = xrow[kk];
          if (xv == 0.0) continue;
          const double* yrow = y.data() + kk * p;
          for (std::size_t j = 0; j < p; ++j) orow[j] += xv * yrow[j];
        }
      }
      n.value = std::move(out);
      break;
    }
    default:
      throw NumericError("graph: bad binary op");
  }
  return push(std::move(n));
}

NodeId Graph::unary(Op op, NodeId a) {
  check(a);
  Node n;
  n.op = op;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  const Tensor& x = nodes_[a].value;
  Tensor out(x.rows(), x.cols());
  const std::size_t sz = x.size();
  switch (op) {
    case Op::exp:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::exp(x[i]);
      break;
    case Op::log:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::log(x[i]);
      break;
    case Op::sqrt:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::sqrt(x[i]);
      break;
    case Op::sin:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::sin(x[i]);
      break;
    case Op::cos:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::cos(x[i]);
      break;
    case Op::sigmoid:
      for (std::size_t i = 0; i < sz; ++i)
        out[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                             : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      break;
    case Op::softplus:
      // log(1 + e^x), overflow-safe.
      for (std::size_t i = 0; i < sz; ++i)
        out[i] = x[i] > 0.0 ? x[i] + std::log1p(std::exp(-x[i]))
                            : std::log1p(std::exp(x[i]));
      break;
    case Op::reciprocal:
      for (std::size_t i = 0; i < sz; ++i) out[i] = 1.0 / x[i];
      break;
    case Op::transpose: {
      Tensor t(x.cols(), x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) t.at(j, i) = x.at(i, j);
      out = std::move(t);
      break;
    }
    default:
      throw NumericError("graph: bad unary op");
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return binary(Op::sub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }
NodeId Graph::matmul(NodeId a, NodeId b) { return binary(Op::matmul, a, b); }
NodeId Graph::transpose(NodeId a) { return unary(Op::transpose, a); }
NodeId Graph::exp(NodeId a) { return unary(Op::exp, a); }
NodeId Graph::log(NodeId a) { return unary(Op::log, a); }
NodeId Graph::sqrt(NodeId a) { return unary(Op::sqrt, a); }
NodeId Graph::sin(NodeId a) { return unary(Op::sin, a); }
NodeId Graph::cos(NodeId a) { return unary(Op::cos, a); }
NodeId Graph::sigmoid(NodeId a) { return unary(Op::sigmoid, a); }
NodeId Graph::softplus(NodeId a) { return unary(Op::softplus, a); }
NodeId Graph::reciprocal(NodeId a) { return unary(Op::reciprocal, a); }

NodeId Graph::scale(NodeId a, double c) {
  check(a);
  Node n;
  n.op = Op::scale;
  n.a = a;
  n.scalar = c;
  n.needs_grad = nodes_[a].needs_grad;
  n.value = nodes_[a].value;
  n.value.scale_inplace(c);
  return push(std::move(n));
}

NodeId Graph::add_scalar(NodeId a, double c) {
  check(a);
  Node n;
  n.op = Op::add_scalar;
  n.a = a;
  n.scalar = c;
  n.needs_grad = nodes_[a].needs_grad;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += c;
  return push(std::move(n));
}

NodeId Graph::min_scalar(NodeId a, double c) {
  check(a);
  Node n;
  n.op = Op::min_scalar;
  n.a = a;
  n.scalar = c;
  n.needs_grad = nodes_[a].needs_grad;
  const Tensor& x = nodes_[a].value;
  n.value = Tensor(x.rows(), x.cols());
  // Remember where the input won; backward multiplies by this indicator.
  auto mask = std::make_shared<std::vector<std::uint32_t>>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool below = x[i] < c;
    (*mask)[i] = below ? 1u : 0u;
    n.value[i] = below ? x[i] : c;
  }
  n.indices = std::move(mask);
  return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
  check(a);
  Node n;
  n.op = Op::sum_all;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.value = Tensor::scalar(nodes_[a].value.sum());
  return push(std::move(n));
}

NodeId Graph::sum_cols(NodeId a) {
  check(a);
  const Tensor& x = nodes_[a].value;
  Node n;
  n.op = Op::sum_cols;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += x.at(i, j);
    out.at(i, 0) = s;
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::sum_rows(NodeId a) {
  check(a);
  const Tensor& x = nodes_[a].value;
  Node n;
  n.op = Op::sum_rows;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(0, j) += x.at(i, j);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::bcast_cols(NodeId a, std::size_t m) {
  check(a);
  const Tensor& x = nodes_[a].value;
  if (x.cols() != 1) throw NumericError("bcast_cols: input must be Nx1");
  Node n;
  n.op = Op::bcast_cols;
  n.a = a;
  n.i0 = static_cast<std::uint32_t>(m);
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(x.rows(), m);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) = x.at(i, 0);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::bcast_rows(NodeId a, std::size_t nrows) {
  check(a);
  const Tensor& x = nodes_[a].value;
  if (x.rows() != 1) throw NumericError("bcast_rows: input must be 1xM");
  Node n;
  n.op = Op::bcast_rows;
  n.a = a;
  n.i0 = static_cast<std::uint32_t>(nrows);
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(nrows, x.cols());
  for (std::size_t i = 0; i < nrows; ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(0, j);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::row_max(NodeId a) {
  check(a);
  const Tensor& x = nodes_[a].value;
  Node n;
  n.op = Op::row_max;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(x.rows(), 1);
  auto arg = std::make_shared<std::vector<std::uint32_t>>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = x.at(i, 0);
    std::uint32_t bj = 0;
    for (std::size_t j = 1; j < x.cols(); ++j)
      if (x.at(i, j) > best) {
        best = x.at(i, j);
        bj = static_cast<std::uint32_t>(j);
      }
    out.at(i, 0) = best;
    (*arg)[i] = bj;
  }
  n.value = std::move(out);
  n.indices = std::move(arg);
  return push(std::move(n));
}

NodeId Graph::gather_rows(NodeId table, std::vector<std::uint32_t> idx) {
  check(table);
  const Tensor& x = nodes_[table].value;
  for (auto i : idx)
    if (i >= x.rows()) throw NumericError("gather_rows: index out of range");
  Node n;
  n.op = Op::gather_rows;
  n.a = table;
  n.needs_grad = nodes_[table].needs_grad;
  Tensor out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(r, j) = x.at(idx[r], j);
  n.value = std::move(out);
  n.indices = std::make_shared<std::vector<std::uint32_t>>(std::move(idx));
  return push(std::move(n));
}

NodeId Graph::scatter_rows(NodeId a, std::vector<std::uint32_t> idx,
                           std::size_t out_rows) {
  check(a);
  const Tensor& x = nodes_[a].value;
  if (idx.size() != x.rows())
    throw NumericError("scatter_rows: index count must match rows");
  for (auto i : idx)
    if (i >= out_rows) throw NumericError("scatter_rows: index out of range");
  Node n;
  n.op = Op::scatter_rows;
  n.a = a;
  n.i0 = static_cast<std::uint32_t>(out_rows);
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(out_rows, x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(idx[r], j) += x.at(r, j);
  n.value = std::move(out);
  n.indices = std::make_shared<std::vector<std::uint32_t>>(std::move(idx));
  return push(std::move(n));
}

NodeId Graph::slice_rows(NodeId a, std::size_t r0, std::size_t r1) {
  check(a);
  const Tensor& x = nodes_[a].value;
  if (r0 >= r1 || r1 > x.rows()) throw NumericError("slice_rows: bad range");
  Node n;
  n.op = Op::slice_rows;
  n.a = a;
  n.i0 = static_cast<std::uint32_t>(r0);
  n.i1 = static_cast<std::uint32_t>(r1);
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(r1 - r0, x.cols());
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i - r0, j) = x.at(i, j);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::embed_rows(NodeId a, std::size_t r0, std::size_t out_rows) {
  check(a);
  const Tensor& x = nodes_[a].value;
  if (r0 + x.rows() > out_rows) throw NumericError("embed_rows: bad range");
  Node n;
  n.op = Op::embed_rows;
  n.a = a;
  n.i0 = static_cast<std::uint32_t>(r0);
  n.i1 = static_cast<std::uint32_t>(out_rows);
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(out_rows, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(r0 + i, j) = x.at(i, j);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, std::size_t c0, std::size_t c1) {
  check(a);
  const Tensor& x = nodes_[a].value;
  if (c0 >= c1 || c1 > x.cols()) throw NumericError("slice_cols: bad range");
  Node n;
  n.op = Op::slice_cols;
  n.a = a;
  n.i0 = static_cast<std::uint32_t>(c0);
  n.i1 = static_cast<std::uint32_t>(c1);
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(x.rows(), c1 - c0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = x.at(i, j);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::embed_cols(NodeId a, std::size_t c0, std::size_t out_cols) {
  check(a);
  const Tensor& x = nodes_[a].value;
  if (c0 + x.cols() > out_cols) throw NumericError("embed_cols: bad range");
  Node n;
  n.op = Op::embed_cols;
  n.a = a;
  n.i0 = static_cast<std::uint32_t>(c0);
  n.i1 = static_cast<std::uint32_t>(out_cols);
  n.needs_grad = nodes_[a].needs_grad;
  Tensor out(x.rows(), out_cols);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, c0 + j) = x.at(i, j);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a) {
  // Stabilized by row-max subtraction; exactly shift-invariant, so the
  // argmax subgradient cancels and the composite is smooth.
  const std::size_t m = value(a).cols();
  NodeId mx = row_max(a);
  NodeId shifted = sub(a, bcast_cols(mx, m));
  NodeId e = exp(shifted);
  NodeId norm = reciprocal(sum_cols(e));
  return mul(e, bcast_cols(norm, m));
}

NodeId Graph::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Tensor& xv = value(x);
  const std::size_t d = xv.cols();
  if (d < 2) throw NumericError("layer_norm: needs width >= 2");
  if (value(gain).cols() != d || value(bias).cols() != d)
    throw NumericError("layer_norm: gain/bias width mismatch");
  const std::size_t n = xv.rows();
  NodeId mean = scale(sum_cols(x), 1.0 / static_cast<double>(d));
  NodeId centered = sub(x, bcast_cols(mean, d));
  NodeId var = scale(sum_cols(mul(centered, centered)),
                     1.0 / static_cast<double>(d));
  NodeId inv_std = reciprocal(sqrt(add_scalar(var, eps)));
  NodeId normed = mul(centered, bcast_cols(inv_std, d));
  return add(mul(normed, bcast_rows(gain, n)), bcast_rows(bias, n));
}

NodeId Graph::mean_all(NodeId a) {
  const Tensor& x = value(a);
  return scale(sum_all(a), 1.0 / static_cast<double>(x.size()));
}

std::vector<NodeId> Graph::backward(NodeId output) {
  check(output);
  const Tensor& ov = nodes_[output].value;
  if (ov.rows() != 1 || ov.cols() != 1)
    throw NumericError("backward: output must be a 1x1 scalar, got " +
                       shape_str(ov));
  const std::size_t n_at_call = nodes_.size();
  std::vector<NodeId> grad(n_at_call, kNoNode);
  if (!nodes_[output].needs_grad) return grad;
  grad[output] = constant(Tensor::scalar(1.0));

  // Pushing nodes reallocates nodes_, so each case copies what it needs from
  // the vector before building contribution nodes.
  auto accum = [&](NodeId target, NodeId contrib) {
    grad[target] =
        grad[target] == kNoNode ? contrib : add(grad[target], contrib);
  };
  auto wants = [&](NodeId t) { return nodes_[t].needs_grad; };

  for (NodeId id = output + 1; id-- > 0;) {
    if (grad[id] == kNoNode) continue;
    const Op op = nodes_[id].op;
    const NodeId a = nodes_[id].a, b = nodes_[id].b;
    const double c = nodes_[id].scalar;
    const std::uint32_t i0 = nodes_[id].i0;
    const auto indices = nodes_[id].indices;
    const std::size_t arows = a == kNoNode ? 0 : nodes_[a].value.rows();
    const std::size_t acols = a == kNoNode ? 0 : nodes_[a].value.cols();
    const NodeId g = grad[id];
    switch (op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::add:
        if (wants(a)) accum(a, g);
        if (wants(b)) accum(b, g);
        break;
      case Op::sub:
        if (wants(a)) accum(a, g);
        if (wants(b)) accum(b, scale(g, -1.0));
        break;
      case Op::mul:
        if (wants(a)) accum(a, mul(g, b));
        if (wants(b)) accum(b, mul(g, a));
        break;
      case Op::matmul:
        if (wants(a)) accum(a, matmul(g, transpose(b)));
        if (wants(b)) accum(b, matmul(transpose(a), g));
        break;
      case Op::transpose:
        if (wants(a)) accum(a, transpose(g));
        break;
      case Op::scale:
        if (wants(a)) accum(a, scale(g, c));
        break;
      case Op::add_scalar:
        if (wants(a)) accum(a, g);
        break;
      case Op::exp:
        if (wants(a)) accum(a, mul(g, id));
        break;
      case Op::log:
        if (wants(a)) accum(a, mul(g, reciprocal(a)));
        break;
      case Op::sqrt:
        if (wants(a)) accum(a, mul(g, scale(reciprocal(id), 0.5)));
        break;
      case Op::sin:
        if (wants(a)) accum(a, mul(g, cos(a)));
        break;
      case Op::cos:
        if (wants(a)) accum(a, scale(mul(g, sin(a)), -1.0));
        break;
      case Op::sigmoid:
        if (wants(a)) {
          NodeId one = constant(Tensor::full(arows, acols, 1.0));
          accum(a, mul(g, mul(id, sub(one, id))));
        }
        break;
      case Op::softplus:
        if (wants(a)) accum(a, mul(g, sigmoid(a)));
        break;
      case Op::reciprocal:
        if (wants(a)) accum(a, scale(mul(g, mul(id, id)), -1.0));
        break;
      case Op::min_scalar:
        if (wants(a)) {
          Tensor mask(arows, acols);
          for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = (*indices)[i] ? 1.0 : 0.0;
          accum(a, mul(g, constant(std::move(mask))));
        }
        break;
      case Op::sum_all:
        if (wants(a)) accum(a, bcast_rows(bcast_cols(g, acols), arows));
        break;
      case Op::sum_cols:
        if (wants(a)) accum(a, bcast_cols(g, acols));
        break;
      case Op::sum_rows:
        if (wants(a)) accum(a, bcast_rows(g, arows));
        break;
      case Op::bcast_cols:
        if (wants(a)) accum(a, sum_cols(g));
        break;
      case Op::bcast_rows:
        if (wants(a)) accum(a, sum_rows(g));
        break;
      case Op::row_max:
        if (wants(a)) {
          Tensor ind(arows, acols);
          for (std::size_t i = 0; i < arows; ++i)
            ind.at(i, (*indices)[i]) = 1.0;
          NodeId indc = constant(std::move(ind));
          accum(a, mul(bcast_cols(g, acols), indc));
        }
        break;
      case Op::gather_rows:
        if (wants(a)) accum(a, scatter_rows(g, *indices, arows));
        break;
      case Op::scatter_rows:
        if (wants(a)) accum(a, gather_rows(g, *indices));
        break;
      case Op::slice_rows:
        if (wants(a)) accum(a, embed_rows(g, i0, arows));
        break;
      case Op::embed_rows:
        if (wants(a)) accum(a, slice_rows(g, i0, i0 + arows));
        break;
      case Op::slice_cols:
        if (wants(a)) accum(a, embed_cols(g, i0, acols));
        break;
      case Op::embed_cols:
        if (wants(a)) accum(a, slice_cols(g, i0, i0 + acols));
        break;
    }
  }
  return grad;
}

}  // namespace molct::ad
