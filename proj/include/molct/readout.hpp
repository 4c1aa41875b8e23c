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

#ifndef MOLCT_READOUT_HPP
#define MOLCT_READOUT_HPP

#include <vector>

#include "molct/attention.hpp"
#include "molct/featurize.hpp"

namespace molct {

struct MolCtModel;  // defined in niu.hpp

struct ReadoutParams {
  MlpParams node_mlp;   // D -> D -> D/2 -> 1
  MlpParams edge_mlp;   // symmetric pair features -> 1
  MlpParams graph_mlp;  // D -> D -> D

  static ReadoutParams create(ParameterStore& store, const std::string& prefix,
                              std::size_t node_dim, std::size_t edge_dim,
                              Rng& rng);
};

struct EnergyForcePrediction {
  double total_energy = 0.0;               // dataset units
  std::vector<double> per_atom_energy;     // dataset units
  ad::Tensor forces;                       // N x 3, dataset units
  double mean_ponder_steps = 0.0;
};

// Full pipeline: featurize, encode, iterate the geometric operator, read out
// atomic energies, and differentiate the total energy for forces. Exact
// gradients, not finite differences.
EnergyForcePrediction predict_energy_forces(const MolecularGraph& graph,
                                            const MolCtModel& model,
                                            const ParameterStore& store);

// (1 - lambda) (E0 - sum E_i)^2 + lambda sum_i |F_i0 - F_i|^2. Eager form for
// metrics; training builds the same expression as graph nodes.
double loss_value(double energy_pred, const ad::Tensor& forces_pred,
                  double energy_label, const ad::Tensor& forces_label,
                  double lambda, double ponder_cost = 0.0,
                  double ponder_weight = 0.0);

// Symmetric pair readout: elementwise n_i + n_j and |n_i - n_j| concatenated
// with the (symmetrized) relational and positional edge vectors, through an
// MLP. Swapping i and j cannot change the result.
ad::Tensor edge_readout(const ad::Tensor& n_i, const ad::Tensor& n_j,
                        const ad::Tensor* v_ij, const ad::Tensor* v_ji,
                        const ad::Tensor& e_ij, const MlpParams& p,
                        const ParameterStore& store);

// Mean-pool over nodes, then an MLP: one global vector per graph.
ad::Tensor graph_readout(const ad::Tensor& node_matrix, const MlpParams& p,
                         const ParameterStore& store);

}  // namespace molct

#endif  // MOLCT_READOUT_HPP
