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

#ifndef MOLCT_RME_HPP
#define MOLCT_RME_HPP

#include <utility>
#include <vector>

#include "molct/attention.hpp"
#include "molct/featurize.hpp"

namespace molct {

// One relational encoder block: masked MHA over relation-augmented keys and
// values, then a position-wise FFN; residual + post-norm at both sublayers.
struct RmeBlockParams {
  MhaParams mha;
  ParamId w_k2 = -1;  // d x D edge projections
  ParamId w_v2 = -1;
  MlpParams ffn;
  LayerNormParams norm_attn;
  LayerNormParams norm_ffn;

  static RmeBlockParams create(ParameterStore& store, const std::string& prefix,
                               std::size_t node_dim, std::size_t edge_dim,
                               std::size_t heads, std::size_t ffn_hidden,
                               Rng& rng);
};

// Zero blocks are legal: the encoder is then the identity (relation-blind
// mode used in ablations).
using RmeStack = std::vector<RmeBlockParams>;

// Keys/values for reference node i: k_ji = z_j + v_ij W_k2 (zero v-term when
// no relational edge). Returns (K_i, V_i), both N x D.
std::pair<ad::NodeId, ad::NodeId> rme_keys_values(
    ad::Graph& g, ad::NodeId z, const MolecularGraph& mol, std::size_t i,
    const RmeBlockParams& p, LeafMap& leaf, ad::NodeId relation_table);

ad::NodeId rme_block(ad::Graph& g, ad::NodeId z, const MolecularGraph& mol,
                     const RmeBlockParams& p, LeafMap& leaf,
                     ad::NodeId relation_table);

ad::NodeId rme_forward(ad::Graph& g, ad::NodeId z, const MolecularGraph& mol,
                       const RmeStack& stack, LeafMap& leaf,
                       ad::NodeId relation_table);

}  // namespace molct

#endif  // MOLCT_RME_HPP
