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

#include "molct/ego_attention.hpp"

namespace molct {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

EaParams EaParams::create(ParameterStore& store, const std::string& prefix,
                          std::size_t node_dim, std::size_t edge_dim,
                          std::size_t heads, bool use_ffn,
                          std::size_t ffn_hidden, Rng& rng) {
  EaParams p;
  p.w_p = store.add_xavier(prefix + ".wp", edge_dim, node_dim, rng);
  p.b_p = store.add_zeros(prefix + ".bp", 1, node_dim);
  p.self_edge = store.add_normal(prefix + ".self_edge", 1, edge_dim, 0.1, rng);
  p.mha = MhaParams::create(store, prefix + ".mha", node_dim, heads, rng);
  p.pre_norm = LayerNormParams::create(store, prefix + ".pre_norm", node_dim);
  p.use_ffn = use_ffn;
  if (use_ffn) {
    p.ffn = make_position_wise_ffn(store, prefix + ".ffn", node_dim,
                                   ffn_hidden, rng);
    p.ffn_norm = LayerNormParams::create(store, prefix + ".ffn_norm", node_dim);
  }
  return p;
}

NodeId positional_embed(Graph& g, const GraphFeatures& f, std::size_t i,
                        const EaParams& p, LeafMap& leaf) {
  const std::size_t n = f.n;
  NodeId e_full = g.add(f.edge_rows[i],
                        g.embed_rows(leaf(p.self_edge), i, n));
  return g.add(g.matmul(e_full, leaf(p.w_p)), g.bcast_rows(leaf(p.b_p), n));
}

EaWorkspace make_ea_workspace(Graph& g, const GraphFeatures& f,
                              const EaParams& p, LeafMap& leaf) {
  EaWorkspace ws;
  ws.p_rows.reserve(f.n);
  for (std::size_t i = 0; i < f.n; ++i)
    ws.p_rows.push_back(positional_embed(g, f, i, p, leaf));
  return ws;
}

NodeId ego_attention_update(Graph& g, NodeId n, const GraphFeatures& f,
                            std::size_t i, const EaParams& p,
                            const EaWorkspace& ws, LeafMap& leaf,
                            AttnOut* diag) {
  NodeId embedded = g.mul(n, ws.p_rows[i]);  // rows are n_j (x) P_ji
  NodeId normed = layer_norm_rows(g, embedded, p.pre_norm, leaf);
  NodeId q = g.slice_rows(normed, i, i + 1);
  AttnMaskSpec mask;  // geometric operator: every particle visible
  mask.decay = f.decay_cols[i];
  NodeId attn = mha(g, q, normed, normed, p.mha, leaf, mask, diag);
  return g.add(g.slice_rows(n, i, i + 1), attn);
}

NodeId ea_block(Graph& g, NodeId n, const GraphFeatures& f, const EaParams& p,
                LeafMap& leaf, std::vector<AttnOut>* diag) {
  EaWorkspace ws = make_ea_workspace(g, f, p, leaf);
  NodeId out = ad::kNoNode;
  for (std::size_t i = 0; i < f.n; ++i) {
    AttnOut a;
    NodeId row = ego_attention_update(g, n, f, i, p, ws, leaf,
                                      diag ? &a : nullptr);
    if (diag) diag->push_back(a);
    NodeId placed = g.embed_rows(row, i, f.n);
    out = out == ad::kNoNode ? placed : g.add(out, placed);
  }
  if (p.use_ffn) {
    NodeId normed = layer_norm_rows(g, out, p.ffn_norm, leaf);
    out = g.add(out, position_wise_ffn(g, normed, p.ffn, leaf));
  }
  return out;
}

CfcParams CfcParams::create(ParameterStore& store, const std::string& prefix,
                            std::size_t node_dim, std::size_t edge_dim,
                            std::size_t filters, std::size_t ffn_hidden,
                            Rng& rng) {
  CfcParams p;
  p.filter = MlpParams::create(store, prefix + ".filter",
                               {edge_dim, filters, node_dim}, rng);
  p.w_in = store.add_xavier(prefix + ".win", node_dim, node_dim, rng);
  p.w_out = store.add_xavier(prefix + ".wout", node_dim, node_dim, rng);
  p.refine = make_position_wise_ffn(store, prefix + ".refine", node_dim,
                                    ffn_hidden, rng);
  return p;
}

NodeId cfc_block(Graph& g, NodeId n, const GraphFeatures& f,
                 const CfcParams& p, LeafMap& leaf) {
  const std::size_t N = f.n;
  const std::size_t dim = g.value(n).cols();
  NodeId projected = g.matmul(n, leaf(p.w_in));  // shared across references
  NodeId out = ad::kNoNode;
  for (std::size_t i = 0; i < N; ++i) {
    NodeId filt = mlp_apply(g, f.edge_rows[i], p.filter, leaf);  // N x D
    // Exclude self: the decay column pins w_ii to 1, the keep mask drops it.
    Tensor keep(N, 1);
    for (std::size_t r = 0; r < N; ++r) keep.at(r, 0) = r == i ? 0.0 : 1.0;
    NodeId w = g.mul(f.decay_cols[i], g.constant(std::move(keep)));
    NodeId contrib = g.mul(g.mul(projected, filt), g.bcast_cols(w, dim));
    NodeId summed = g.sum_rows(contrib);  // 1 x D
    NodeId row = g.add(g.slice_rows(n, i, i + 1),
                       g.matmul(summed, leaf(p.w_out)));
    NodeId placed = g.embed_rows(row, i, N);
    out = out == ad::kNoNode ? placed : g.add(out, placed);
  }
  return g.add(out, position_wise_ffn(g, out, p.refine, leaf));
}

}  // namespace molct
