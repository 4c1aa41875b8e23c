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

#include "molct/niu.hpp"

#include <algorithm>
#include <cmath>

#include "molct/errors.hpp"

namespace molct {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

Tensor time_embedding(int t, std::size_t dim) {
  Tensor e(1, dim);
  const double td = static_cast<double>(t);
  for (std::size_t i = 0; i < dim; ++i) {
    const std::size_t k = i / 2;
    const double omega =
        1.0 / std::pow(10000.0, 2.0 * static_cast<double>(k) /
                                    static_cast<double>(dim));
    e[i] = (i % 2 == 0) ? std::sin(omega * td) : std::cos(omega * td);
  }
  return e;
}

NiuParams NiuParams::create(ParameterStore& store, const std::string& prefix,
                            std::size_t node_dim, std::size_t edge_dim,
                            std::size_t heads, bool use_ffn,
                            std::size_t ffn_hidden, std::size_t ponder_hidden,
                            Rng& rng) {
  NiuParams p;
  p.ea = EaParams::create(store, prefix + ".ea", node_dim, edge_dim, heads,
                          use_ffn, ffn_hidden, rng);
  p.ponder = MlpParams::create(store, prefix + ".ponder",
                               {node_dim, ponder_hidden, 1}, rng);
  return p;
}

NodeId halting_prob(Graph& g, NodeId n_row, int t, const NiuParams& p,
                    LeafMap& leaf) {
  const std::size_t dim = g.value(n_row).cols();
  NodeId embedded = g.add(n_row, g.constant(time_embedding(t, dim)));
  return g.sigmoid(mlp_apply(g, embedded, p.ponder, leaf));
}

NiuResult niu_forward(Graph& g, NodeId n, const GraphFeatures& f,
                      const NiuParams& p, LeafMap& leaf,
                      const NiuOptions& opt) {
  if (opt.t_max < 1) throw NumericError("niu_forward: t_max must be >= 1");
  const std::size_t N = f.n;
  EaWorkspace ws = make_ea_workspace(g, f, p.ea, leaf);

  NiuResult res;
  res.halt_steps.assign(N, 0);
  std::vector<NodeId> rows(N);
  for (std::size_t i = 0; i < N; ++i) rows[i] = g.slice_rows(n, i, i + 1);
  std::vector<bool> halted(N, false);
  std::vector<double> cum(N, 0.0);
  // Sum of halting probabilities before the halting step, per node; the ACT
  // remainder 1 - sum keeps the pondering network on the gradient path.
  std::vector<NodeId> prev_mass(N, ad::kNoNode);
  std::vector<NodeId> remainder(N, ad::kNoNode);
  std::vector<AttnOut> last_attn(N);

  NodeId cur = n;
  for (int t = 1; t <= opt.t_max; ++t) {
    bool all_halted = true;
    for (std::size_t i = 0; i < N; ++i) {
      if (halted[i]) continue;
      AttnOut attn;
      NodeId row = ego_attention_update(g, cur, f, i, p.ea, ws, leaf,
                                        opt.collect_attention ? &attn : nullptr);
      if (opt.collect_attention) last_attn[i] = attn;
      NodeId ph = halting_prob(g, row, t, p, leaf);
      const double pval = g.value(ph)[0];
      rows[i] = row;
      const bool halts =
          cum[i] + pval >= 1.0 - opt.halt_epsilon || t == opt.t_max;
      cum[i] += pval;
      if (halts) {
        halted[i] = true;
        res.halt_steps[i] = t;
        remainder[i] =
            prev_mass[i] == ad::kNoNode
                ? g.constant(Tensor::scalar(1.0))
                : g.sub(g.constant(Tensor::scalar(1.0)), prev_mass[i]);
      } else {
        prev_mass[i] =
            prev_mass[i] == ad::kNoNode ? ph : g.add(prev_mass[i], ph);
        all_halted = false;
      }
    }
    // Synchronous snapshot for the next step; frozen rows are reused as-is.
    NodeId next = ad::kNoNode;
    for (std::size_t i = 0; i < N; ++i) {
      NodeId placed = g.embed_rows(rows[i], i, N);
      next = next == ad::kNoNode ? placed : g.add(next, placed);
    }
    cur = next;
    if (all_halted) break;
  }

  res.n_out = cur;
  double total_steps = 0.0;
  NodeId rem_sum = ad::kNoNode;
  for (std::size_t i = 0; i < N; ++i) {
    total_steps += static_cast<double>(res.halt_steps[i]);
    rem_sum = rem_sum == ad::kNoNode ? remainder[i]
                                     : g.add(rem_sum, remainder[i]);
  }
  res.mean_steps = total_steps / static_cast<double>(N);
  res.ponder_cost = g.add_scalar(g.scale(rem_sum, 1.0 / static_cast<double>(N)),
                                 res.mean_steps);
  if (opt.collect_attention) {
    res.attention.reserve(N);
    for (std::size_t i = 0; i < N; ++i)
      res.attention.push_back(last_attn[i].alpha == ad::kNoNode
                                  ? Tensor()
                                  : g.value(last_attn[i].alpha));
  }
  return res;
}

std::string species_signature(const MolecularGraph& mol, std::size_t i) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> env;  // (type, species)
  for (const auto& e : mol.relational_edges)
    if (e.i == i) env.emplace_back(e.type, mol.species[e.j]);
  std::sort(env.begin(), env.end());
  std::string sig = std::to_string(mol.species[i]) + "|";
  for (const auto& [t, z] : env)
    sig += std::to_string(t) + ":" + std::to_string(z) + ",";
  return sig;
}

std::vector<std::uint32_t> remap_species(const MolecularGraph& mol,
                                         const MolCtModel& model) {
  std::vector<std::uint32_t> ids(mol.n_particles());
  for (std::size_t i = 0; i < mol.n_particles(); ++i) {
    const std::string sig = species_signature(mol, i);
    auto it = model.species_remap.find(sig);
    if (it == model.species_remap.end())
      throw DataError("species environment '" + sig +
                      "' outside trained vocabulary");
    ids[i] = it->second;
  }
  return ids;
}

ForwardResult molct_forward(Graph& g, const MolecularGraph& mol,
                            const MolCtModel& model,
                            const ParameterStore& store,
                            const ForwardOptions& opt) {
  validate_graph(mol, model.fcfg);
  const std::size_t N = mol.n_particles();
  LeafMap leaf(g, store);

  ForwardResult res;
  res.coords_leaf = g.leaf(mol.coords);
  GraphFeatures features =
      build_graph_features(g, res.coords_leaf, N, model.fcfg);

  std::vector<std::uint32_t> ids =
      model.artificial_species ? remap_species(mol, model) : mol.species;
  for (std::uint32_t id : ids)
    if (id >= store.value(model.species_table).rows())
      throw DataError("species id " + std::to_string(id) +
                      " outside trained vocabulary");
  NodeId z = g.gather_rows(leaf(model.species_table), ids);
  NodeId h = rme_forward(g, z, mol, model.rme, leaf,
                         leaf(model.relation_table));

  const int t_cap = opt.t_max_override > 0 ? opt.t_max_override
                                           : model.iterations;
  switch (model.op) {
    case OperatorKind::ea: {
      const int repeats =
          model.ea_blocks.size() == 1 ? std::max(1, model.iterations) : 1;
      for (const auto& blk : model.ea_blocks)
        for (int t = 0; t < repeats; ++t) {
          std::vector<AttnOut> diag;
          h = ea_block(g, h, features, blk, leaf,
                       opt.collect_diagnostics ? &diag : nullptr);
          if (opt.collect_diagnostics) {
            res.attention.clear();
            for (auto& a : diag) res.attention.push_back(g.value(a.alpha));
          }
        }
      break;
    }
    case OperatorKind::cfc: {
      const int repeats =
          model.cfc_blocks.size() == 1 ? std::max(1, model.iterations) : 1;
      for (const auto& blk : model.cfc_blocks)
        for (int t = 0; t < repeats; ++t) h = cfc_block(g, h, features, blk, leaf);
      break;
    }
    case OperatorKind::niu: {
      NodeId cost = ad::kNoNode;
      double steps = 0.0;
      for (const auto& unit : model.nius) {
        NiuOptions nopt;
        nopt.t_max = t_cap;
        nopt.halt_epsilon = model.halt_epsilon;
        nopt.collect_attention = opt.collect_diagnostics;
        NiuResult r = niu_forward(g, h, features, unit, leaf, nopt);
        h = r.n_out;
        cost = cost == ad::kNoNode ? r.ponder_cost
                                   : g.add(cost, r.ponder_cost);
        steps += r.mean_steps;
        res.halt_steps.push_back(r.halt_steps);
        if (opt.collect_diagnostics) res.attention = r.attention;
      }
      res.ponder_cost = cost;
      res.mean_ponder_steps =
          model.nius.empty() ? 0.0
                             : steps / static_cast<double>(model.nius.size());
      break;
    }
  }
  res.node_matrix = h;
  return res;
}

EnergyForcesNodes build_energy_forces(Graph& g, const MolecularGraph& mol,
                                      const MolCtModel& model,
                                      const ParameterStore& store,
                                      const ForwardOptions& opt) {
  EnergyForcesNodes out;
  out.forward = molct_forward(g, mol, model, store, opt);
  LeafMap leaf(g, store);
  out.per_atom = mlp_apply(g, out.forward.node_matrix, model.readout.node_mlp,
                           leaf);
  out.energy = g.sum_all(out.per_atom);
  auto grads = g.backward(out.energy);
  NodeId coord_grad = grads[out.forward.coords_leaf];
  if (coord_grad == ad::kNoNode)
    throw NumericError("forces: energy does not depend on coordinates");
  out.forces = g.scale(coord_grad, -1.0);
  return out;
}

}  // namespace molct
