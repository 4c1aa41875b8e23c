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

#include "molct/attention.hpp"

#include <cmath>

#include "molct/errors.hpp"

namespace molct {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

namespace {
constexpr double kMaskedLogit = -1e30;
const double kLn2 = std::log(2.0);
}  // namespace

MlpParams MlpParams::create(ParameterStore& store, const std::string& prefix,
                            const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw NumericError("mlp: needs at least two dims");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.push_back(store.add_xavier(
        prefix + ".w" + std::to_string(l), dims[l], dims[l + 1], rng));
    p.biases.push_back(
        store.add_zeros(prefix + ".b" + std::to_string(l), 1, dims[l + 1]));
  }
  return p;
}

NodeId shifted_softplus(Graph& g, NodeId x) {
  return g.add_scalar(g.softplus(x), -kLn2);
}

NodeId mlp_apply(Graph& g, NodeId x, const MlpParams& p, LeafMap& leaf) {
  const std::size_t rows = g.value(x).rows();
  NodeId h = x;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = g.add(g.matmul(h, leaf(p.weights[l])),
              g.bcast_rows(leaf(p.biases[l]), rows));
    if (l + 1 < p.weights.size()) h = shifted_softplus(g, h);
  }
  return h;
}

ad::Tensor mlp_apply_eager(const Tensor& x, const MlpParams& p,
                           const ParameterStore& store) {
  Graph g;
  LeafMap leaf(g, store);
  NodeId out = mlp_apply(g, g.constant(x), p, leaf);
  return g.value(out);
}

LayerNormParams LayerNormParams::create(ParameterStore& store,
                                        const std::string& prefix,
                                        std::size_t dim) {
  LayerNormParams p;
  p.gain = store.add(prefix + ".gain", Tensor::full(1, dim, 1.0));
  p.bias = store.add_zeros(prefix + ".bias", 1, dim);
  return p;
}

NodeId layer_norm_rows(Graph& g, NodeId x, const LayerNormParams& p,
                       LeafMap& leaf) {
  return g.layer_norm(x, leaf(p.gain), leaf(p.bias));
}

MhaParams MhaParams::create(ParameterStore& store, const std::string& prefix,
                            std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0)
    throw NumericError("mha: node dim " + std::to_string(dim) +
                       " not divisible by head count " +
                       std::to_string(heads));
  MhaParams p;
  p.heads = heads;
  const std::size_t dh = dim / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string s = std::to_string(h);
    p.wq.push_back(store.add_xavier(prefix + ".wq" + s, dim, dh, rng));
    p.wk.push_back(store.add_xavier(prefix + ".wk" + s, dim, dh, rng));
    p.wv.push_back(store.add_xavier(prefix + ".wv" + s, dim, dh, rng));
  }
  p.wo = store.add_xavier(prefix + ".wo", dim, dim, rng);
  return p;
}

AttnOut dot_attention(Graph& g, NodeId q, NodeId k, NodeId v,
                      const AttnMaskSpec& mask) {
  const Tensor& kv = g.value(k);
  const std::size_t n = kv.rows();
  const std::size_t dh = g.value(q).cols();
  if (kv.cols() != dh || g.value(v).rows() != n)
    throw NumericError("dot_attention: shape mismatch");
  if (!mask.allowed.empty()) {
    if (mask.allowed.size() != n)
      throw NumericError("dot_attention: mask length mismatch");
    bool any = false;
    for (bool b : mask.allowed) any = any || b;
    if (!any) throw NumericError("dot_attention: all rows disallowed");
  }

  NodeId logits = g.scale(g.matmul(q, g.transpose(k)),
                          1.0 / std::sqrt(static_cast<double>(dh)));
  if (!mask.allowed.empty()) {
    Tensor m(1, n);
    for (std::size_t j = 0; j < n; ++j)
      m[j] = mask.allowed[j] ? 0.0 : kMaskedLogit;
    logits = g.add(logits, g.constant(std::move(m)));
  }
  AttnOut out;
  out.alpha_raw = g.softmax_rows(logits);
  out.alpha = mask.decay == ad::kNoNode
                  ? out.alpha_raw
                  : g.mul(out.alpha_raw, g.transpose(mask.decay));
  out.out = g.matmul(out.alpha, v);
  return out;
}

NodeId mha(Graph& g, NodeId q, NodeId k, NodeId v, const MhaParams& p,
           LeafMap& leaf, const AttnMaskSpec& mask, AttnOut* head0) {
  const std::size_t dim = g.value(q).cols();
  const std::size_t dh = dim / p.heads;
  NodeId concat = ad::kNoNode;
  for (std::size_t h = 0; h < p.heads; ++h) {
    NodeId qh = g.matmul(q, leaf(p.wq[h]));
    NodeId kh = g.matmul(k, leaf(p.wk[h]));
    NodeId vh = g.matmul(v, leaf(p.wv[h]));
    AttnOut a = dot_attention(g, qh, kh, vh, mask);
    if (h == 0 && head0) *head0 = a;
    NodeId placed = g.embed_cols(a.out, h * dh, dim);
    concat = concat == ad::kNoNode ? placed : g.add(concat, placed);
  }
  return g.matmul(concat, leaf(p.wo));
}

}  // namespace molct
