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

#include "molct/readout.hpp"

#include <cmath>

#include "molct/errors.hpp"
#include "molct/niu.hpp"

namespace molct {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

ReadoutParams ReadoutParams::create(ParameterStore& store,
                                    const std::string& prefix,
                                    std::size_t node_dim, std::size_t edge_dim,
                                    Rng& rng) {
  ReadoutParams p;
  const std::size_t half = std::max<std::size_t>(1, node_dim / 2);
  p.node_mlp = MlpParams::create(store, prefix + ".node",
                                 {node_dim, node_dim, half, 1}, rng);
  p.edge_mlp = MlpParams::create(
      store, prefix + ".edge", {2 * node_dim + 2 * edge_dim, node_dim, 1}, rng);
  p.graph_mlp = MlpParams::create(store, prefix + ".graph",
                                  {node_dim, node_dim, node_dim}, rng);
  return p;
}

EnergyForcePrediction predict_energy_forces(const MolecularGraph& graph,
                                            const MolCtModel& model,
                                            const ParameterStore& store) {
  Graph g;
  EnergyForcesNodes nodes = build_energy_forces(g, graph, model, store);
  const std::size_t n = graph.n_particles();

  EnergyForcePrediction pred;
  const Tensor& per_atom = g.value(nodes.per_atom);
  pred.per_atom_energy.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pred.per_atom_energy[i] = per_atom.at(i, 0) * model.scale +
                              model.energy_shift / static_cast<double>(n);
    total += per_atom.at(i, 0);
  }
  pred.total_energy = total * model.scale + model.energy_shift;
  pred.forces = g.value(nodes.forces);
  pred.forces.scale_inplace(model.scale);
  if (!pred.forces.all_finite())
    throw NumericError("predict: non-finite forces");
  pred.mean_ponder_steps = nodes.forward.mean_ponder_steps;
  return pred;
}

double loss_value(double energy_pred, const Tensor& forces_pred,
                  double energy_label, const Tensor& forces_label,
                  double lambda, double ponder_cost, double ponder_weight) {
  if (lambda < 0.0 || lambda > 1.0)
    throw NumericError("loss: lambda must lie in [0, 1]");
  if (!forces_pred.same_shape(forces_label))
    throw NumericError("loss: force label shape mismatch");
  const double de = energy_label - energy_pred;
  double f = 0.0;
  for (std::size_t i = 0; i < forces_pred.size(); ++i) {
    const double d = forces_label[i] - forces_pred[i];
    f += d * d;
  }
  return (1.0 - lambda) * de * de + lambda * f + ponder_weight * ponder_cost;
}

Tensor edge_readout(const Tensor& n_i, const Tensor& n_j, const Tensor* v_ij,
                    const Tensor* v_ji, const Tensor& e_ij, const MlpParams& p,
                    const ParameterStore& store) {
  const std::size_t dim = n_i.cols();
  const std::size_t d = e_ij.cols();
  Tensor feat(1, 2 * dim + 2 * d);
  for (std::size_t c = 0; c < dim; ++c) {
    feat[c] = n_i[c] + n_j[c];
    feat[dim + c] = std::fabs(n_i[c] - n_j[c]);
  }
  // Directed relational vectors are averaged with their reverse so the pair
  // feature cannot depend on the order of the arguments.
  for (std::size_t c = 0; c < d; ++c) {
    double v = 0.0;
    if (v_ij) v += 0.5 * (*v_ij)[c];
    if (v_ji) v += 0.5 * (*v_ji)[c];
    feat[2 * dim + c] = v;
    feat[2 * dim + d + c] = e_ij[c];
  }
  return mlp_apply_eager(feat, p, store);
}

Tensor graph_readout(const Tensor& node_matrix, const MlpParams& p,
                     const ParameterStore& store) {
  const std::size_t n = node_matrix.rows();
  if (n < 1) throw NumericError("graph_readout: empty node matrix");
  Tensor pooled(1, node_matrix.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < node_matrix.cols(); ++c)
      pooled[c] += node_matrix.at(i, c) / static_cast<double>(n);
  return mlp_apply_eager(pooled, p, store);
}

}  // namespace molct
