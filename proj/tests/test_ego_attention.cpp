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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "molct/adam.hpp"
#include "molct/ego_attention.hpp"

using namespace molct;
using ad::Graph;
using ad::NodeId;
using ad::Tensor;

namespace {

struct Fixture {
  std::size_t D, d, heads;
  ParameterStore store;
  EaParams ea;
  FeaturizerConfig fcfg;
  Rng rng{2024};

  explicit Fixture(std::size_t D_ = 8, std::size_t d_ = 6,
                   std::size_t heads_ = 2)
      : D(D_), d(d_), heads(heads_) {
    ea = EaParams::create(store, "ea0", D, d, heads, false, 2 * D, rng);
    fcfg.edge_dim = d;
    fcfg.node_dim = D;
  }

  Tensor rand_n(std::size_t n) {
    Tensor t(n, D);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
  }

  Tensor run_block(const Tensor& coords, const Tensor& n) {
    Graph g;
    LeafMap leaf(g, store);
    GraphFeatures f =
        build_graph_features(g, g.constant(coords), coords.rows(), fcfg);
    return g.value(ea_block(g, g.constant(n), f, ea, leaf));
  }
};

}  // namespace

TEST_CASE("positional embedding basics") {
  Fixture f;
  Tensor coords = Tensor::from(3, 3, {0, 0, 0, 1.0, 0, 0, 0, 1.0, 0});
  SUBCASE("zero weight matrix leaves only the bias") {
    f.store.mutable_value(f.ea.w_p).fill(0.0);
    Tensor bias(1, f.D);
    for (std::size_t c = 0; c < f.D; ++c)
      bias[c] = f.rng.normal();
    f.store.mutable_value(f.ea.b_p) = bias;
    Graph g;
    LeafMap leaf(g, f.store);
    GraphFeatures gf = build_graph_features(g, g.constant(coords), 3, f.fcfg);
    Tensor p = g.value(positional_embed(g, gf, 0, f.ea, leaf));
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < f.D; ++c)
        CHECK(p.at(j, c) == doctest::Approx(bias[c]).epsilon(1e-15));
  }
  SUBCASE("equal distances give equal embedding rows") {
    Graph g;
    LeafMap leaf(g, f.store);
    GraphFeatures gf = build_graph_features(g, g.constant(coords), 3, f.fcfg);
    // |r_01| == |r_02| == 1
    Tensor p = g.value(positional_embed(g, gf, 0, f.ea, leaf));
    for (std::size_t c = 0; c < f.D; ++c)
      CHECK(p.at(1, c) == doctest::Approx(p.at(2, c)).epsilon(1e-12));
  }
  SUBCASE("self rows share the learned constant for every reference") {
    Graph g;
    LeafMap leaf(g, f.store);
    GraphFeatures gf = build_graph_features(g, g.constant(coords), 3, f.fcfg);
    Tensor p0 = g.value(positional_embed(g, gf, 0, f.ea, leaf));
    Tensor p1 = g.value(positional_embed(g, gf, 1, f.ea, leaf));
    Tensor p2 = g.value(positional_embed(g, gf, 2, f.ea, leaf));
    for (std::size_t c = 0; c < f.D; ++c) {
      CHECK(p0.at(0, c) == p1.at(1, c));
      CHECK(p1.at(1, c) == p2.at(2, c));
    }
  }
}

TEST_CASE("single particle update is finite and deterministic") {
  Fixture f;
  Tensor coords(1, 3);
  Tensor n = f.rand_n(1);
  Tensor a = f.run_block(coords, n);
  Tensor b = f.run_block(coords, n);
  CHECK(a.all_finite());
  CHECK(a == b);
}

TEST_CASE("beyond-cutoff rows contribute exactly zero") {
  Fixture f;
  // Particle 1 sits outside the cutoff; its decayed coefficient is exactly 0,
  // so its value row is inert.
  Tensor coords = Tensor::from(2, 3, {0, 0, 0, 15.0, 0, 0});
  Graph g;
  LeafMap leaf(g, f.store);
  GraphFeatures gf = build_graph_features(g, g.constant(coords), 2, f.fcfg);
  CHECK(g.value(gf.decay_cols[0]).at(1, 0) == 0.0);

  Tensor n1 = f.rand_n(2);
  Tensor n2 = n1;
  for (std::size_t c = 0; c < f.D; ++c) n2.at(1, c) *= -3.0;
  EaWorkspace ws = make_ea_workspace(g, gf, f.ea, leaf);
  AttnOut diag;
  NodeId r1 = ego_attention_update(g, g.constant(n1), gf, 0, f.ea, ws, leaf,
                                   &diag);
  CHECK(g.value(diag.alpha)[1] == 0.0);
  // The far value row is multiplied by an exactly-zero coefficient; only the
  // key-side softmax normalization sees it.
  (void)r1;
}

TEST_CASE("far-particle influence decays with distance") {
  // Beyond the cutoff the decayed coefficient is exactly zero; the residual
  // influence through the softmax normalization blurs away as the log-RBF
  // features flatten out.
  Fixture f;
  Tensor base = f.rand_n(2);
  auto at = [&](double r) {
    return f.run_block(Tensor::from(2, 3, {0, 0, 0, r, 0, 0}), base);
  };
  Tensor ref = at(400.0);
  const double d_near = ad::max_abs_diff(at(2.0), ref);
  const double d_mid = ad::max_abs_diff(at(30.0), ref);
  const double d_far = ad::max_abs_diff(at(200.0), ref);
  CHECK(d_mid < d_near);
  CHECK(d_far < d_mid);
  CHECK(d_far < 1e-3);
}

TEST_CASE("isometry invariance of the block") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 5);
  Tensor n = f.rand_n(5);
  Tensor base = f.run_block(mol.coords, n);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    MolecularGraph moved = test::apply_isometry(
        mol, test::random_rotation(f.rng), f.rng.uniform(-4, 4),
        f.rng.uniform(-4, 4), f.rng.uniform(-4, 4));
    worst = std::max(worst, ad::max_abs_diff(base, f.run_block(moved.coords, n)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("permutation equivariance of the block") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 4);
  Tensor n = f.rand_n(4);
  std::vector<std::uint32_t> perm = {2, 0, 3, 1};
  MolecularGraph pmol = test::permute_graph(mol, perm);
  Tensor pn(4, f.D);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < f.D; ++c) pn.at(perm[i], c) = n.at(i, c);
  Tensor a = f.run_block(mol.coords, n);
  Tensor b = f.run_block(pmol.coords, pn);
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < f.D; ++c)
      worst = std::max(worst, std::fabs(a.at(i, c) - b.at(perm[i], c)));
  CHECK(worst < 1e-10);
}

TEST_CASE("update is continuous as a particle crosses the cutoff") {
  Fixture f;
  Tensor n = f.rand_n(2);
  const double delta = 1e-3;
  Tensor prev;
  double max_jump = 0.0;
  for (double r = 9.99; r <= 10.01; r += delta) {
    Tensor coords = Tensor::from(2, 3, {0, 0, 0, r, 0, 0});
    Tensor out = f.run_block(coords, n);
    if (!prev.empty()) max_jump = std::max(max_jump, ad::max_abs_diff(prev, out));
    prev = out;
  }
  CHECK(max_jump < 50.0 * delta);
}

TEST_CASE("a single block couples three bodies") {
  // Mixed second derivative of node 0's update w.r.t. particles 1 and 2:
  // nonzero means the operator is not a sum of pairwise terms.
  Fixture f;
  Tensor n = f.rand_n(3);
  Tensor coords = Tensor::from(3, 3, {0, 0, 0, 1.4, 0, 0, 0, 1.7, 0});
  auto out0 = [&](double dx1, double dy2) {
    Tensor c = coords;
    c.at(1, 0) += dx1;
    c.at(2, 1) += dy2;
    return f.run_block(c, n).at(0, 0);
  };
  const double h = 1e-3;
  const double mixed = (out0(h, h) - out0(h, -h) - out0(-h, h) +
                        out0(-h, -h)) /
                       (4.0 * h * h);
  CHECK(std::fabs(mixed) > 1e-6);
}

TEST_CASE("block gradient w.r.t. coordinates matches finite differences") {
  Fixture f(8, 6, 2);
  MolecularGraph mol = test::random_molecule(f.rng, 4);
  Tensor n = f.rand_n(4);
  Tensor probe(4, f.D);
  for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = f.rng.uniform();

  Graph g;
  LeafMap leaf(g, f.store);
  NodeId coords = g.leaf(mol.coords);
  GraphFeatures gf = build_graph_features(g, coords, 4, f.fcfg);
  NodeId out = g.sum_all(
      g.mul(ea_block(g, g.constant(n), gf, f.ea, leaf), g.constant(probe)));
  auto grads = g.backward(out);
  Tensor analytic = g.value(grads[coords]);
  Tensor numeric = ad::finite_diff_grad(
      [&](const Tensor& c) {
        Graph h;
        LeafMap lf(h, f.store);
        GraphFeatures hf = build_graph_features(h, h.constant(c), 4, f.fcfg);
        return h.value(h.sum_all(h.mul(
            ea_block(h, h.constant(n), hf, f.ea, lf), h.constant(probe))))[0];
      },
      mol.coords, 1e-5);
  CHECK(ad::max_rel_err(analytic, numeric) < 1e-4);
}

TEST_CASE("cfc sanity reduction to a cutoff-weighted neighbor sum") {
  Rng rng(31);
  ParameterStore store;
  CfcParams cfc = CfcParams::create(store, "cfc0", 4, 6, 8, 8, rng);
  // Filter network constant one, unit projections, refinement off.
  for (ParamId p : cfc.filter.weights) store.mutable_value(p).fill(0.0);
  for (ParamId p : cfc.filter.biases) store.mutable_value(p).fill(0.0);
  store.mutable_value(cfc.filter.biases.back()).fill(1.0);
  store.mutable_value(cfc.w_in) = Tensor::identity(4);
  store.mutable_value(cfc.w_out) = Tensor::identity(4);
  for (ParamId p : cfc.refine.weights) store.mutable_value(p).fill(0.0);
  for (ParamId p : cfc.refine.biases) store.mutable_value(p).fill(0.0);

  FeaturizerConfig fcfg;
  fcfg.edge_dim = 6;
  fcfg.node_dim = 4;
  Tensor coords = Tensor::from(3, 3, {0, 0, 0, 1.0, 0, 0, 0, 2.0, 0});
  Tensor n(3, 4);
  Rng nr(5);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = nr.normal();

  Graph g;
  LeafMap leaf(g, store);
  GraphFeatures gf = build_graph_features(g, g.constant(coords), 3, fcfg);
  Tensor out = g.value(cfc_block(g, g.constant(n), gf, cfc, leaf));

  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      double expect = n.at(i, c);
      for (std::size_t j = 0; j < 3; ++j) {
        if (j == i) continue;
        double r = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
          const double d = coords.at(i, k) - coords.at(j, k);
          r += d * d;
        }
        expect += n.at(j, c) * cutoff_weight(std::sqrt(r), fcfg.r_cut);
      }
      CHECK(out.at(i, c) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("cfc block is isometry invariant and permutation equivariant") {
  Rng rng(33);
  ParameterStore store;
  CfcParams cfc = CfcParams::create(store, "cfc0", 6, 6, 12, 12, rng);
  FeaturizerConfig fcfg;
  fcfg.edge_dim = 6;
  fcfg.node_dim = 6;
  MolecularGraph mol = test::random_molecule(rng, 4);
  Tensor n(4, 6);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = rng.normal();
  auto run = [&](const Tensor& coords, const Tensor& nodes) {
    Graph g;
    LeafMap leaf(g, store);
    GraphFeatures gf = build_graph_features(g, g.constant(coords), 4, fcfg);
    return g.value(cfc_block(g, g.constant(nodes), gf, cfc, leaf));
  };
  Tensor base = run(mol.coords, n);
  MolecularGraph moved = test::apply_isometry(mol, test::random_rotation(rng),
                                              1.0, -2.0, 0.5);
  CHECK(ad::max_abs_diff(base, run(moved.coords, n)) < 1e-10);

  std::vector<std::uint32_t> perm = {3, 1, 0, 2};
  MolecularGraph pmol = test::permute_graph(mol, perm);
  Tensor pn(4, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 6; ++c) pn.at(perm[i], c) = n.at(i, c);
  Tensor pout = run(pmol.coords, pn);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(pout.at(perm[i], c) == doctest::Approx(base.at(i, c)).epsilon(1e-12));
}

TEST_CASE("one EA block is lighter than one CFC block at matched widths") {
  Rng rng(35);
  ParameterStore store;
  EaParams::create(store, "ea", 32, 32, 8, false, 64, rng);
  CfcParams::create(store, "cfc", 32, 32, 64, 64, rng);
  const std::size_t ea_count = store.scalar_count_prefix("ea.");
  const std::size_t cfc_count = store.scalar_count_prefix("cfc.");
  CHECK(ea_count < cfc_count);
  // The paper's ratio: one EA operator is roughly half the weight of CFC.
  CHECK(static_cast<double>(ea_count) / static_cast<double>(cfc_count) < 0.7);
}
