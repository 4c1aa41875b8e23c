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

#ifndef MOLCT_NIU_HPP
#define MOLCT_NIU_HPP

#include <map>
#include <string>
#include <vector>

#include "molct/ego_attention.hpp"
#include "molct/readout.hpp"
#include "molct/rme.hpp"

namespace molct {

// Sinusoidal step embedding: entry 2k = sin(w_k t), 2k+1 = cos(w_k t),
// w_k = 10000^(-2k/D).
ad::Tensor time_embedding(int t, std::size_t dim);

// One adaptive unit: a tied geometric operator plus a position-wise pondering
// network that decides, per node and per step, whether to halt.
struct NiuParams {
  EaParams ea;       // tied across all iteration steps
  MlpParams ponder;  // D -> hidden -> 1, sigmoid at the output

  static NiuParams create(ParameterStore& store, const std::string& prefix,
                          std::size_t node_dim, std::size_t edge_dim,
                          std::size_t heads, bool use_ffn,
                          std::size_t ffn_hidden, std::size_t ponder_hidden,
                          Rng& rng);
};

// sigmoid(FFN(n_i ⊕ T^(t))), strictly inside (0,1).
ad::NodeId halting_prob(ad::Graph& g, ad::NodeId n_row, int t,
                        const NiuParams& p, LeafMap& leaf);

struct NiuOptions {
  int t_max = 3;
  double halt_epsilon = 0.01;
  bool collect_attention = false;
};

struct NiuResult {
  ad::NodeId n_out = ad::kNoNode;
  std::vector<int> halt_steps;              // t_i per node
  ad::NodeId ponder_cost = ad::kNoNode;     // mean_i (t_i + remainder_i)
  double mean_steps = 0.0;                  // sum_i t_i / N
  std::vector<ad::Tensor> attention;        // head-0 alpha at each node's last step
};

// Iterates the tied operator with per-node halting. A node halts once its
// accumulated probability reaches 1 - epsilon (or at t_max); its state is
// then copied forward unchanged but stays visible to the others as keys and
// values.
NiuResult niu_forward(ad::Graph& g, ad::NodeId n, const GraphFeatures& f,
                      const NiuParams& p, LeafMap& leaf,
                      const NiuOptions& opt);

enum class OperatorKind { ea, cfc, niu };

// The assembled model: embeddings, relational encoder, a stack of geometric
// operators (adaptive or fixed-depth), and the readout heads.
struct MolCtModel {
  FeaturizerConfig fcfg;
  std::size_t heads = 8;
  ParamId species_table = -1;   // vocab x D
  ParamId relation_table = -1;  // vocab x d
  RmeStack rme;
  OperatorKind op = OperatorKind::niu;
  // Total depth: a single block is repeated `iterations` times (tied); a
  // stack of distinct blocks is applied once each. For NIUs, `iterations`
  // is the training-time halting cap.
  int iterations = 3;
  std::vector<EaParams> ea_blocks;
  std::vector<CfcParams> cfc_blocks;
  std::vector<NiuParams> nius;
  ReadoutParams readout;
  double halt_epsilon = 0.01;
  double ponder_cost_weight = 0.001;
  // Bond-pattern species remap (the artificial-atom-types ablation).
  bool artificial_species = false;
  std::map<std::string, std::uint32_t> species_remap;
  // Label standardization: physical = model_units * scale + shift (energy),
  // physical = model_units * scale (forces).
  double energy_shift = 0.0;
  double scale = 1.0;
};

struct ForwardOptions {
  int t_max_override = 0;  // 0: use model.iterations
  bool collect_diagnostics = false;
};

struct ForwardResult {
  ad::NodeId coords_leaf = ad::kNoNode;
  ad::NodeId node_matrix = ad::kNoNode;     // n^(T), N x D
  ad::NodeId ponder_cost = ad::kNoNode;     // summed over NIUs (NIU models)
  double mean_ponder_steps = 0.0;           // averaged over NIUs
  std::vector<std::vector<int>> halt_steps; // per NIU, per node
  std::vector<ad::Tensor> attention;        // per node, last operator
};

ForwardResult molct_forward(ad::Graph& g, const MolecularGraph& mol,
                            const MolCtModel& model,
                            const ParameterStore& store,
                            const ForwardOptions& opt = {});

// Forward plus readout and the exact force gradient, in model units.
struct EnergyForcesNodes {
  ForwardResult forward;
  ad::NodeId energy = ad::kNoNode;       // 1 x 1
  ad::NodeId per_atom = ad::kNoNode;     // N x 1
  ad::NodeId forces = ad::kNoNode;       // N x 3
};

EnergyForcesNodes build_energy_forces(ad::Graph& g, const MolecularGraph& mol,
                                      const MolCtModel& model,
                                      const ParameterStore& store,
                                      const ForwardOptions& opt = {});

// WL-style 1-hop signature "z|type:neighbor_z,..." used by the
// artificial-atom-types ablation.
std::string species_signature(const MolecularGraph& mol, std::size_t i);
std::vector<std::uint32_t> remap_species(const MolecularGraph& mol,
                                         const MolCtModel& model);

}  // namespace molct

#endif  // MOLCT_NIU_HPP
