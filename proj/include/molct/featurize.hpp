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

#ifndef MOLCT_FEATURIZE_HPP
#define MOLCT_FEATURIZE_HPP

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "molct/graph.hpp"
#include "molct/tensor.hpp"

namespace molct {

struct RelationalEdge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t type = 0;
};

// Dual representation of a many-particle system: particle identities plus
// coordinates, and relational (bond / sequence) edges. Relational edges are
// stored directed; an undirected bond appears once per direction.
struct MolecularGraph {
  std::vector<std::uint32_t> species;  // atomic number or residue-type id
  ad::Tensor coords;                   // N x 3, Angstrom
  std::vector<RelationalEdge> relational_edges;

  std::size_t n_particles() const { return species.size(); }
};

struct FeaturizerConfig {
  std::size_t edge_dim = 32;  // d
  double r_min = 0.5;         // Angstrom
  double r_cut = 10.0;        // Angstrom
  double sigma = 0.0;         // 0 = use the center spacing
  bool log_scale = true;      // false: plain-r RBF (ablation baseline)
  std::size_t node_dim = 32;  // D
  std::size_t species_vocab = 100;
  std::size_t relation_vocab = 8;

  void validate() const;
  // RBF centers: edge_dim evenly spaced points in [log r_min, log r_cut]
  // (or [r_min, r_cut] when log_scale is off).
  std::vector<double> centers() const;
  double center_spacing() const;
  double sigma_value() const;  // sigma, or the spacing when sigma == 0
};

// Per-pair feature bundle. positional[i] holds the edge rows seen from
// reference particle i (row j = e(r_ij)); the self row is the caller-supplied
// constant vector (all ones by default; the model passes its learned one).
struct EdgeFeatures {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<ad::Tensor> positional;  // n tensors of n x d
  std::map<std::pair<std::uint32_t, std::uint32_t>, ad::Tensor> relational;
  std::vector<std::vector<bool>> neighbor_mask;  // [i][j]: edge (i,j) or i==j
  ad::Tensor cutoff;     // n x n smooth decay weights
  ad::Tensor distances;  // n x n, zero diagonal
};

struct FeaturizeResult {
  EdgeFeatures features;
  ad::Tensor node_state;  // N x D initial embeddings z_i
};

// e_k(r) = exp(-(log r - mu_k)^2 / (2 sigma^2)); errors on r <= 0.
ad::Tensor log_rbf(double r, const FeaturizerConfig& cfg);

// Behler-style cosine cutoff: 1 at r=0, exactly 0 for r >= r_cut.
double cutoff_weight(double r, double r_cut);

// Row lookup per particle; identical species share their initial vector.
ad::Tensor embed_nodes(const std::vector<std::uint32_t>& species,
                       const ad::Tensor& embedding_table);

std::map<std::pair<std::uint32_t, std::uint32_t>, ad::Tensor> embed_relations(
    const std::vector<RelationalEdge>& edges, const ad::Tensor& relation_table);

FeaturizeResult featurize(const MolecularGraph& graph,
                          const FeaturizerConfig& cfg,
                          const ad::Tensor& species_table,
                          const ad::Tensor& relation_table,
                          const ad::Tensor* self_edge = nullptr);

void validate_graph(const MolecularGraph& graph, const FeaturizerConfig& cfg);

// Differentiable featurization over a coordinate leaf. Self rows of the edge
// matrices are zeroed (the geometric operator inserts its learned vector);
// self entries of the decay columns are pinned to 1.
struct GraphFeatures {
  ad::NodeId coords = ad::kNoNode;        // N x 3 leaf
  ad::NodeId distances = ad::kNoNode;     // N x N, diagonal artificially 1
  std::vector<ad::NodeId> edge_rows;      // per i: N x d, row i zeroed
  std::vector<ad::NodeId> decay_cols;     // per i: N x 1, entry i == 1
  std::size_t n = 0;
};

GraphFeatures build_graph_features(ad::Graph& g, ad::NodeId coords_leaf,
                                   std::size_t n, const FeaturizerConfig& cfg);

}  // namespace molct

#endif  // MOLCT_FEATURIZE_HPP
