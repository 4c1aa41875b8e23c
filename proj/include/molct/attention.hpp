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

#ifndef MOLCT_ATTENTION_HPP
#define MOLCT_ATTENTION_HPP

#include <string>
#include <vector>

#include "molct/graph.hpp"
#include "molct/params.hpp"

namespace molct {

// Per-evaluation cache of parameter leaves: tied parameters used several
// times in one graph share a single leaf node.
class LeafMap {
 public:
  LeafMap(ad::Graph& g, const ParameterStore& store)
      : g_(&g), store_(&store), cache_(store.count(), ad::kNoNode) {}
  ad::NodeId operator()(ParamId id) {
    if (cache_[id] == ad::kNoNode) cache_[id] = store_->make_leaf(*g_, id);
    return cache_[id];
  }
  ad::Graph& graph() { return *g_; }

 private:
  ad::Graph* g_;
  const ParameterStore* store_;
  std::vector<ad::NodeId> cache_;
};

// Dense layers with shifted-softplus between them (none after the last).
// Shared by every position-wise network in the model.
struct MlpParams {
  std::vector<ParamId> weights;
  std::vector<ParamId> biases;

  static MlpParams create(ParameterStore& store, const std::string& prefix,
                          const std::vector<std::size_t>& dims, Rng& rng);
  std::size_t in_dim(const ParameterStore& store) const {
    return store.value(weights.front()).rows();
  }
  std::size_t out_dim(const ParameterStore& store) const {
    return store.value(weights.back()).cols();
  }
};

// Applies the MLP to every row of x.
ad::NodeId mlp_apply(ad::Graph& g, ad::NodeId x, const MlpParams& p,
                     LeafMap& leaf);
ad::Tensor mlp_apply_eager(const ad::Tensor& x, const MlpParams& p,
                           const ParameterStore& store);

// ln(1 + e^x) - ln 2: smooth, zero at zero; keeps forces continuous.
ad::NodeId shifted_softplus(ad::Graph& g, ad::NodeId x);

struct LayerNormParams {
  ParamId gain = -1;
  ParamId bias = -1;
  static LayerNormParams create(ParameterStore& store,
                                const std::string& prefix, std::size_t dim);
};

ad::NodeId layer_norm_rows(ad::Graph& g, ad::NodeId x,
                           const LayerNormParams& p, LeafMap& leaf);

struct MhaParams {
  std::size_t heads = 1;
  std::vector<ParamId> wq, wk, wv;  // per head, D x (D/k)
  ParamId wo = -1;                  // D x D

  static MhaParams create(ParameterStore& store, const std::string& prefix,
                          std::size_t dim, std::size_t heads, Rng& rng);
};

// Boolean row mask plus optional smooth decay weights (an N x 1 graph node so
// the cutoff stays on the gradient path).
struct AttnMaskSpec {
  std::vector<bool> allowed;  // empty = every row allowed
  ad::NodeId decay = ad::kNoNode;
};

struct AttnOut {
  ad::NodeId out = ad::kNoNode;        // 1 x D
  ad::NodeId alpha = ad::kNoNode;      // 1 x N, post-decay (what out uses)
  ad::NodeId alpha_raw = ad::kNoNode;  // 1 x N, sums to 1 over allowed rows
};

// Scaled dot-product attention for one query row (Eq.-2 style). Disallowed
// rows get logit -1e30; decay multiplies coefficients after the softmax with
// no renormalization, so distant rows genuinely vanish.
AttnOut dot_attention(ad::Graph& g, ad::NodeId q, ad::NodeId k, ad::NodeId v,
                      const AttnMaskSpec& mask);

// Multi-head attention; per-head logits scale by sqrt(D/k). Optionally
// reports the per-head attention of head 0 for diagnostics.
ad::NodeId mha(ad::Graph& g, ad::NodeId q, ad::NodeId k, ad::NodeId v,
               const MhaParams& p, LeafMap& leaf, const AttnMaskSpec& mask,
               AttnOut* head0 = nullptr);

// One-hidden-layer position-wise FFN (width D_ff), the sublayer shared by the
// encoder blocks.
inline MlpParams make_position_wise_ffn(ParameterStore& store,
                                        const std::string& prefix,
                                        std::size_t dim, std::size_t hidden,
                                        Rng& rng) {
  return MlpParams::create(store, prefix, {dim, hidden, dim}, rng);
}
inline ad::NodeId position_wise_ffn(ad::Graph& g, ad::NodeId x,
                                    const MlpParams& p, LeafMap& leaf) {
  return mlp_apply(g, x, p, leaf);
}

}  // namespace molct

#endif  // MOLCT_ATTENTION_HPP
