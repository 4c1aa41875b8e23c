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

#include "molct/featurize.hpp"

#include <cmath>
#include <string>

#include "molct/errors.hpp"

namespace molct {

using ad::NodeId;
using ad::Tensor;

void FeaturizerConfig::validate() const {
  if (!(r_min > 0.0) || !(r_min < r_cut))
    throw DataError("featurizer: need 0 < r_min < r_cut, got r_min=" +
                    std::to_string(r_min) + " r_cut=" + std::to_string(r_cut));
  if (edge_dim < 2) throw DataError("featurizer: edge_dim must be >= 2");
  if (sigma < 0.0) throw DataError("featurizer: sigma must be positive");
  if (node_dim < 2) throw DataError("featurizer: node_dim must be >= 2");
}

std::vector<double> FeaturizerConfig::centers() const {
  const double lo = log_scale ? std::log(r_min) : r_min;
  const double hi = log_scale ? std::log(r_cut) : r_cut;
  std::vector<double> mu(edge_dim);
  const double step = (hi - lo) / static_cast<double>(edge_dim - 1);
  for (std::size_t k = 0; k < edge_dim; ++k)
    mu[k] = lo + step * static_cast<double>(k);
  return mu;
}

double FeaturizerConfig::center_spacing() const {
  const double lo = log_scale ? std::log(r_min) : r_min;
  const double hi = log_scale ? std::log(r_cut) : r_cut;
  return (hi - lo) / static_cast<double>(edge_dim - 1);
}

double FeaturizerConfig::sigma_value() const {
  return sigma > 0.0 ? sigma : center_spacing();
}

Tensor log_rbf(double r, const FeaturizerConfig& cfg) {
  if (!(r > 0.0))
    throw DataError("log_rbf: distance must be positive, got " +
                    std::to_string(r));
  const double x = cfg.log_scale ? std::log(r) : r;
  const auto mu = cfg.centers();
  const double s = cfg.sigma_value();
  Tensor e(1, cfg.edge_dim);
  for (std::size_t k = 0; k < cfg.edge_dim; ++k) {
    const double z = x - mu[k];
    e[k] = std::exp(-z * z / (2.0 * s * s));
  }
  return e;
}

double cutoff_weight(double r, double r_cut) {
  if (r >= r_cut) return 0.0;
  if (r <= 0.0) return 1.0;
  return 0.5 * (std::cos(M_PI * r / r_cut) + 1.0);
}

Tensor embed_nodes(const std::vector<std::uint32_t>& species,
                   const Tensor& embedding_table) {
  Tensor z(species.size(), embedding_table.cols());
  for (std::size_t i = 0; i < species.size(); ++i) {
    if (species[i] >= embedding_table.rows())
      throw DataError("embed_nodes: species id " +
                      std::to_string(species[i]) +
                      " outside vocabulary of size " +
                      std::to_string(embedding_table.rows()));
    for (std::size_t j = 0; j < embedding_table.cols(); ++j)
      z.at(i, j) = embedding_table.at(species[i], j);
  }
  return z;
}

std::map<std::pair<std::uint32_t, std::uint32_t>, Tensor> embed_relations(
    const std::vector<RelationalEdge>& edges, const Tensor& relation_table) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, Tensor> out;
  for (const auto& e : edges) {
    if (e.type >= relation_table.rows())
      throw DataError("embed_relations: relation id " +
                      std::to_string(e.type) +
                      " outside vocabulary of size " +
                      std::to_string(relation_table.rows()));
    auto key = std::make_pair(e.i, e.j);
    if (out.count(key))
      throw DataError("embed_relations: duplicate relational edge (" +
                      std::to_string(e.i) + ", " + std::to_string(e.j) + ")");
    Tensor v(1, relation_table.cols());
    for (std::size_t c = 0; c < relation_table.cols(); ++c)
      v[c] = relation_table.at(e.type, c);
    out.emplace(key, std::move(v));
  }
  return out;
}

void validate_graph(const MolecularGraph& graph, const FeaturizerConfig& cfg) {
  const std::size_t n = graph.n_particles();
  if (n < 1) throw DataError("graph: needs at least one particle");
  if (graph.coords.rows() != n || graph.coords.cols() != 3)
    throw DataError("graph: coords must be N x 3");
  if (!graph.coords.all_finite())
    throw DataError("graph: non-finite coordinates");
  for (const auto& e : graph.relational_edges) {
    if (e.i == e.j)
      throw DataError("graph: self relational edge on particle " +
                      std::to_string(e.i));
    if (e.i >= n || e.j >= n)
      throw DataError("graph: relational edge index out of range");
    if (e.type >= cfg.relation_vocab)
      throw DataError("graph: relation type " + std::to_string(e.type) +
                      " outside vocabulary");
  }
  for (std::uint32_t s : graph.species)
    if (s >= cfg.species_vocab)
      throw DataError("graph: species id " + std::to_string(s) +
                      " outside vocabulary");
}

namespace {

double pair_distance(const Tensor& coords, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = coords.at(i, c) - coords.at(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

FeaturizeResult featurize(const MolecularGraph& graph,
                          const FeaturizerConfig& cfg,
                          const Tensor& species_table,
                          const Tensor& relation_table,
                          const Tensor* self_edge) {
  cfg.validate();
  validate_graph(graph, cfg);
  const std::size_t n = graph.n_particles();
  const std::size_t d = cfg.edge_dim;

  FeaturizeResult out;
  EdgeFeatures& f = out.features;
  f.n = n;
  f.d = d;
  f.distances = Tensor(n, n);
  f.cutoff = Tensor(n, n);
  Tensor self_row = self_edge ? *self_edge : Tensor::full(1, d, 1.0);

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = pair_distance(graph.coords, i, j);
      if (r < cfg.r_min / 10.0)
        throw DataError("featurize: particles " + std::to_string(i) + " and " +
                        std::to_string(j) + " nearly coincident (r = " +
                        std::to_string(r) + ")");
      f.distances.at(i, j) = r;
      f.distances.at(j, i) = r;
    }

  f.positional.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor rows(n, d);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        for (std::size_t k = 0; k < d; ++k) rows.at(j, k) = self_row[k];
        f.cutoff.at(i, j) = 1.0;
        continue;
      }
      Tensor e = log_rbf(f.distances.at(i, j), cfg);
      for (std::size_t k = 0; k < d; ++k) rows.at(j, k) = e[k];
      f.cutoff.at(i, j) = cutoff_weight(f.distances.at(i, j), cfg.r_cut);
    }
    f.positional.push_back(std::move(rows));
  }

  f.relational = embed_relations(graph.relational_edges, relation_table);
  f.neighbor_mask.assign(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) f.neighbor_mask[i][i] = true;
  for (const auto& e : graph.relational_edges) f.neighbor_mask[e.i][e.j] = true;

  out.node_state = embed_nodes(graph.species, species_table);
  return out;
}

GraphFeatures build_graph_features(ad::Graph& g, NodeId coords_leaf,
                                   std::size_t n,
                                   const FeaturizerConfig& cfg) {
  cfg.validate();
  GraphFeatures out;
  out.coords = coords_leaf;
  out.n = n;
  const std::size_t d = cfg.edge_dim;

  // Pairwise squared distances via the Gram matrix; the diagonal is patched
  // to 1 so sqrt/log stay smooth there (self rows are masked downstream).
  NodeId gram = g.matmul(coords_leaf, g.transpose(coords_leaf));
  NodeId sq = g.sum_cols(g.mul(coords_leaf, coords_leaf));  // N x 1
  NodeId r2 = g.sub(g.add(g.bcast_cols(sq, n), g.bcast_rows(g.transpose(sq), n)),
                    g.scale(gram, 2.0));
  Tensor offdiag = Tensor::full(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) offdiag.at(i, i) = 0.0;
  NodeId r2_safe =
      g.add(g.mul(r2, g.constant(offdiag)), g.constant(Tensor::identity(n)));
  NodeId r = g.sqrt(r2_safe);
  out.distances = r;
  NodeId log_r = cfg.log_scale ? g.log(r) : ad::kNoNode;

  const auto mu = cfg.centers();
  Tensor mu_rows(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mu_rows.at(i, k) = mu[k];
  NodeId mu_const = g.constant(std::move(mu_rows));
  const double s = cfg.sigma_value();
  const double inv2s2 = -1.0 / (2.0 * s * s);

  out.edge_rows.reserve(n);
  out.decay_cols.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    NodeId xi = g.slice_cols(cfg.log_scale ? log_r : r, i, i + 1);  // N x 1
    NodeId z = g.sub(g.bcast_cols(xi, d), mu_const);
    NodeId e_raw = g.exp(g.scale(g.mul(z, z), inv2s2));
    Tensor self_zero(n, d);
    for (std::size_t r_ = 0; r_ < n; ++r_)
      for (std::size_t c_ = 0; c_ < d; ++c_)
        self_zero.at(r_, c_) = r_ == i ? 0.0 : 1.0;
    out.edge_rows.push_back(g.mul(e_raw, g.constant(std::move(self_zero))));

    NodeId ri = g.slice_cols(r, i, i + 1);
    NodeId clamped = g.min_scalar(ri, cfg.r_cut);
    NodeId w = g.scale(
        g.add_scalar(g.cos(g.scale(clamped, M_PI / cfg.r_cut)), 1.0), 0.5);
    Tensor keep(n, 1), self_one(n, 1);
    for (std::size_t r_ = 0; r_ < n; ++r_) keep.at(r_, 0) = r_ == i ? 0.0 : 1.0;
    self_one.at(i, 0) = 1.0;
    out.decay_cols.push_back(
        g.add(g.mul(w, g.constant(std::move(keep))),
              g.constant(std::move(self_one))));
  }
  return out;
}

}  // namespace molct
