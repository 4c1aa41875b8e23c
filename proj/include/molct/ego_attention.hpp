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

#ifndef MOLCT_EGO_ATTENTION_HPP
#define MOLCT_EGO_ATTENTION_HPP

#include <vector>

#include "molct/attention.hpp"
#include "molct/featurize.hpp"

namespace molct {

// Geometric many-body operator: every node, taken as reference, embeds all
// nodes by its own relative positional vectors, then attends over them with
// cutoff-decayed coefficients.
struct EaParams {
  ParamId w_p = -1;       // d x D
  ParamId b_p = -1;       // 1 x D
  ParamId self_edge = -1; // 1 x d, shared across reference nodes
  MhaParams mha;
  LayerNormParams pre_norm;
  bool use_ffn = false;   // default off (the lighter configuration)
  MlpParams ffn;
  LayerNormParams ffn_norm;

  static EaParams create(ParameterStore& store, const std::string& prefix,
                         std::size_t node_dim, std::size_t edge_dim,
                         std::size_t heads, bool use_ffn,
                         std::size_t ffn_hidden, Rng& rng);
};

// Positional embeddings per reference node depend only on coordinates and
// parameters, so a tied operator iterated T times builds them once.
struct EaWorkspace {
  std::vector<ad::NodeId> p_rows;  // per reference node i: N x D
};

// P_ji = e_ij W_p + b_p over the rows seen from node i; the self row carries
// the learned constant edge vector.
ad::NodeId positional_embed(ad::Graph& g, const GraphFeatures& f,
                            std::size_t i, const EaParams& p, LeafMap& leaf);

EaWorkspace make_ea_workspace(ad::Graph& g, const GraphFeatures& f,
                              const EaParams& p, LeafMap& leaf);

// Updated row for reference node i (Eqs. 7-9): query/key/value rows are the
// pre-layer-normed position-embedded nodes; decay never touches the self row.
ad::NodeId ego_attention_update(ad::Graph& g, ad::NodeId n,
                                const GraphFeatures& f, std::size_t i,
                                const EaParams& p, const EaWorkspace& ws,
                                LeafMap& leaf, AttnOut* diag = nullptr);

// Synchronous update of all rows, then the optional pre-norm residual FFN.
ad::NodeId ea_block(ad::Graph& g, ad::NodeId n, const GraphFeatures& f,
                    const EaParams& p, LeafMap& leaf,
                    std::vector<AttnOut>* diag = nullptr);

// Minimal continuous-filter convolution baseline for ablations: a
// filter-generating network on edge features, elementwise product with
// projected neighbor states, cutoff-weighted sum, then the position-wise
// refinement the operator requires.
struct CfcParams {
  MlpParams filter;   // d -> filters -> D
  ParamId w_in = -1;  // D x D
  ParamId w_out = -1; // D x D
  MlpParams refine;   // D -> D_ff -> D

  static CfcParams create(ParameterStore& store, const std::string& prefix,
                          std::size_t node_dim, std::size_t edge_dim,
                          std::size_t filters, std::size_t ffn_hidden,
                          Rng& rng);
};

ad::NodeId cfc_block(ad::Graph& g, ad::NodeId n, const GraphFeatures& f,
                     const CfcParams& p, LeafMap& leaf);

}  // namespace molct

#endif  // MOLCT_EGO_ATTENTION_HPP
