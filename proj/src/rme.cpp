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

#include "molct/rme.hpp"

namespace molct {

using ad::Graph;
using ad::NodeId;

RmeBlockParams RmeBlockParams::create(ParameterStore& store,
                                      const std::string& prefix,
                                      std::size_t node_dim,
                                      std::size_t edge_dim, std::size_t heads,
                                      std::size_t ffn_hidden, Rng& rng) {
  RmeBlockParams p;
  p.mha = MhaParams::create(store, prefix + ".mha", node_dim, heads, rng);
  p.w_k2 = store.add_xavier(prefix + ".wk2", edge_dim, node_dim, rng);
  p.w_v2 = store.add_xavier(prefix + ".wv2", edge_dim, node_dim, rng);
  p.ffn = make_position_wise_ffn(store, prefix + ".ffn", node_dim, ffn_hidden,
                                 rng);
  p.norm_attn = LayerNormParams::create(store, prefix + ".norm_attn", node_dim);
  p.norm_ffn = LayerNormParams::create(store, prefix + ".norm_ffn", node_dim);
  return p;
}

std::pair<NodeId, NodeId> rme_keys_values(Graph& g, NodeId z,
                                          const MolecularGraph& mol,
                                          std::size_t i, const RmeBlockParams& p,
                                          LeafMap& leaf,
                                          NodeId relation_table) {
  const std::size_t n = g.value(z).rows();
  std::vector<std::uint32_t> neighbors, types;
  for (const auto& e : mol.relational_edges)
    if (e.i == i) {
      neighbors.push_back(e.j);
      types.push_back(e.type);
    }
  if (neighbors.empty()) return {z, z};
  NodeId v_rows = g.gather_rows(relation_table, types);       // m x d
  NodeId v_full = g.scatter_rows(v_rows, neighbors, n);       // N x d
  NodeId key = g.add(z, g.matmul(v_full, leaf(p.w_k2)));
  NodeId val = g.add(z, g.matmul(v_full, leaf(p.w_v2)));
  return {key, val};
}

NodeId rme_block(Graph& g, NodeId z, const MolecularGraph& mol,
                 const RmeBlockParams& p, LeafMap& leaf,
                 NodeId relation_table) {
  const std::size_t n = g.value(z).rows();
  // With no relational edges anywhere there is no notion of "non-connected",
  // so attention spans all nodes; otherwise it is restricted to relational
  // neighbors plus self.
  const bool restrict_mask = !mol.relational_edges.empty();
  std::vector<std::vector<bool>> allowed(n, std::vector<bool>(n, !restrict_mask));
  if (restrict_mask) {
    for (std::size_t i = 0; i < n; ++i) allowed[i][i] = true;
    for (const auto& e : mol.relational_edges) allowed[e.i][e.j] = true;
  }

  NodeId attn_out = ad::kNoNode;
  for (std::size_t i = 0; i < n; ++i) {
    auto [key, val] = rme_keys_values(g, z, mol, i, p, leaf, relation_table);
    NodeId q = g.slice_rows(z, i, i + 1);
    AttnMaskSpec mask;
    mask.allowed = allowed[i];
    NodeId row = g.add(q, mha(g, q, key, val, p.mha, leaf, mask));
    NodeId placed = g.embed_rows(row, i, n);
    attn_out = attn_out == ad::kNoNode ? placed : g.add(attn_out, placed);
  }
  NodeId h = layer_norm_rows(g, attn_out, p.norm_attn, leaf);
  NodeId after_ffn = g.add(h, position_wise_ffn(g, h, p.ffn, leaf));
  return layer_norm_rows(g, after_ffn, p.norm_ffn, leaf);
}

NodeId rme_forward(Graph& g, NodeId z, const MolecularGraph& mol,
                   const RmeStack& stack, LeafMap& leaf,
                   NodeId relation_table) {
  NodeId h = z;
  for (const auto& block : stack)
    h = rme_block(g, h, mol, block, leaf, relation_table);
  return h;
}

}  // namespace molct
