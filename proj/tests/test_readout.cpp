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
#include "molct/errors.hpp"
#include "molct/readout.hpp"
#include "molct/trainer.hpp"

using namespace molct;
using ad::Tensor;

namespace {

RunConfig small_cfg() {
  RunConfig cfg;
  cfg.node_dim = 8;
  cfg.edge_dim = 6;
  cfg.heads = 2;
  cfg.rme_blocks = 1;
  cfg.op = "niu";
  cfg.blocks = 1;
  cfg.iterations = 2;
  return cfg;
}

}  // namespace

TEST_CASE("total energy is the sum of atomic contributions") {
  BuiltModel bm = build_model(small_cfg(), 17);
  Rng rng(3);
  MolecularGraph mol = test::random_molecule(rng, 5, true);
  EnergyForcePrediction pred =
      predict_energy_forces(mol, bm.model, bm.store);
  double sum = 0.0;
  for (double e : pred.per_atom_energy) sum += e;
  CHECK(std::fabs(pred.total_energy - sum) < 1e-10);
  CHECK(pred.forces.all_finite());
}

TEST_CASE("net force and net torque vanish") {
  BuiltModel bm = build_model(small_cfg(), 23);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    MolecularGraph mol = test::random_molecule(rng, 4 + trial, trial % 2 == 0);
    EnergyForcePrediction pred =
        predict_energy_forces(mol, bm.model, bm.store);
    double fsum[3] = {0, 0, 0};
    double torque[3] = {0, 0, 0};
    for (std::size_t i = 0; i < mol.n_particles(); ++i) {
      const double x = mol.coords.at(i, 0), y = mol.coords.at(i, 1),
                   z = mol.coords.at(i, 2);
      const double fx = pred.forces.at(i, 0), fy = pred.forces.at(i, 1),
                   fz = pred.forces.at(i, 2);
      fsum[0] += fx;
      fsum[1] += fy;
      fsum[2] += fz;
      torque[0] += y * fz - z * fy;
      torque[1] += z * fx - x * fz;
      torque[2] += x * fy - y * fx;
    }
    for (int c = 0; c < 3; ++c) {
      CHECK(std::fabs(fsum[c]) < 1e-8);
      CHECK(std::fabs(torque[c]) < 1e-8);
    }
  }
}

TEST_CASE("forces match finite differences of the energy") {
  BuiltModel bm = build_model(small_cfg(), 29);
  Rng rng(7);
  MolecularGraph mol = test::random_molecule(rng, 4, true);
  EnergyForcePrediction pred = predict_energy_forces(mol, bm.model, bm.store);
  Tensor numeric = ad::finite_diff_grad(
      [&](const Tensor& c) {
        MolecularGraph m2 = mol;
        m2.coords = c;
        return predict_energy_forces(m2, bm.model, bm.store).total_energy;
      },
      mol.coords, 1e-4);
  numeric.scale_inplace(-1.0);
  CHECK(ad::max_rel_err(pred.forces, numeric) < 1e-5);
}

TEST_CASE("energy invariance and force equivariance under rigid motions") {
  BuiltModel bm = build_model(small_cfg(), 31);
  Rng rng(11);
  MolecularGraph mol = test::random_molecule(rng, 5, true);
  EnergyForcePrediction base = predict_energy_forces(mol, bm.model, bm.store);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor rot = test::random_rotation(rng);
    MolecularGraph moved = test::apply_isometry(mol, rot, rng.uniform(-3, 3),
                                                rng.uniform(-3, 3),
                                                rng.uniform(-3, 3));
    EnergyForcePrediction other =
        predict_energy_forces(moved, bm.model, bm.store);
    CHECK(std::fabs(base.total_energy - other.total_energy) < 1e-9);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t r = 0; r < 3; ++r) {
        double rotated = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
          rotated += rot.at(r, c) * base.forces.at(i, c);
        CHECK(std::fabs(rotated - other.forces.at(i, r)) < 1e-8);
      }
  }
}

TEST_CASE("permutation moves per-atom energies and forces consistently") {
  BuiltModel bm = build_model(small_cfg(), 37);
  Rng rng(13);
  MolecularGraph mol = test::random_molecule(rng, 5, true);
  std::vector<std::uint32_t> perm = {4, 2, 0, 1, 3};
  MolecularGraph pmol = test::permute_graph(mol, perm);
  EnergyForcePrediction a = predict_energy_forces(mol, bm.model, bm.store);
  EnergyForcePrediction b = predict_energy_forces(pmol, bm.model, bm.store);
  CHECK(std::fabs(a.total_energy - b.total_energy) < 1e-9);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::fabs(a.per_atom_energy[i] - b.per_atom_energy[perm[i]]) <
          1e-9);
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(std::fabs(a.forces.at(i, c) - b.forces.at(perm[i], c)) < 1e-8);
  }
}

TEST_CASE("loss form") {
  Tensor f_pred = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6});
  SUBCASE("perfect predictions give zero") {
    CHECK(loss_value(5.0, f_pred, 5.0, f_pred, 0.99) == 0.0);
  }
  SUBCASE("lambda zero is the squared energy error") {
    Tensor f_label = f_pred;
    f_label[0] += 10.0;  // ignored at lambda = 0
    CHECK(loss_value(3.0, f_pred, 5.0, f_label, 0.0) ==
          doctest::Approx(4.0).epsilon(1e-15));
  }
  SUBCASE("force term dominates at the experiment default") {
    Tensor f_label = f_pred;
    f_label[0] += 1.0;
    const double l = loss_value(3.0, f_pred, 5.0, f_label, 0.99);
    CHECK(l == doctest::Approx(0.01 * 4.0 + 0.99 * 1.0).epsilon(1e-12));
  }
  SUBCASE("nonnegative, zero only at equality") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor fl(2, 3), fp(2, 3);
      for (std::size_t i = 0; i < 6; ++i) {
        fl[i] = rng.normal();
        fp[i] = rng.normal();
      }
      const double el = rng.normal(), ep = rng.normal();
      const double l = loss_value(ep, fp, el, fl, 0.5);
      CHECK(l >= 0.0);
      if (l == 0.0) {
        CHECK(el == ep);
        CHECK(fl == fp);
      }
    }
  }
  SUBCASE("ponder cost enters with its weight") {
    CHECK(loss_value(1.0, f_pred, 1.0, f_pred, 0.99, 2.5, 0.001) ==
          doctest::Approx(0.0025).epsilon(1e-15));
  }
  SUBCASE("shape mismatch is a contract error") {
    Tensor wrong(3, 3);
    CHECK_THROWS_AS(loss_value(0.0, f_pred, 0.0, wrong, 0.5), NumericError);
  }
  SUBCASE("lambda outside [0,1] is rejected") {
    CHECK_THROWS_AS(loss_value(0.0, f_pred, 0.0, f_pred, 1.5), NumericError);
  }
}

TEST_CASE("edge readout symmetry") {
  Rng rng(17);
  ParameterStore store;
  MlpParams mlp = MlpParams::create(store, "edge", {2 * 8 + 2 * 6, 8, 1}, rng);
  Tensor ni(1, 8), nj(1, 8), vij(1, 6), vji(1, 6), eij(1, 6);
  for (std::size_t c = 0; c < 8; ++c) {
    ni[c] = rng.normal();
    nj[c] = rng.normal();
  }
  for (std::size_t c = 0; c < 6; ++c) {
    vij[c] = rng.normal();
    vji[c] = rng.normal();
    eij[c] = rng.uniform();
  }
  Tensor ab = edge_readout(ni, nj, &vij, &vji, eij, mlp, store);
  Tensor ba = edge_readout(nj, ni, &vji, &vij, eij, mlp, store);
  CHECK(ab == ba);  // exactly symmetric by construction

  SUBCASE("zero weights give zero") {
    ParameterStore zs;
    Rng r2(1);
    MlpParams zm = MlpParams::create(zs, "edge", {2 * 8 + 2 * 6, 8, 1}, r2);
    for (ParamId p = 0; p < static_cast<ParamId>(zs.count()); ++p)
      zs.mutable_value(p).fill(0.0);
    CHECK(edge_readout(ni, nj, &vij, &vji, eij, zm, zs)[0] == 0.0);
  }
  SUBCASE("distinct pairs give distinct values") {
    Tensor nk(1, 8);
    for (std::size_t c = 0; c < 8; ++c) nk[c] = rng.normal();
    Tensor other = edge_readout(ni, nk, &vij, &vji, eij, mlp, store);
    CHECK(std::fabs(ab[0] - other[0]) > 1e-9);
  }
}

TEST_CASE("graph readout pooling") {
  Rng rng(19);
  ParameterStore store;
  MlpParams mlp = MlpParams::create(store, "graph", {6, 6, 6}, rng);
  Tensor nodes(4, 6);
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = rng.normal();

  SUBCASE("permutation invariant") {
    Tensor permuted(4, 6);
    std::vector<std::size_t> perm = {2, 3, 1, 0};
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t c = 0; c < 6; ++c)
        permuted.at(perm[i], c) = nodes.at(i, c);
    Tensor a = graph_readout(nodes, mlp, store);
    Tensor b = graph_readout(permuted, mlp, store);
    CHECK(ad::max_abs_diff(a, b) < 1e-12);
  }
  SUBCASE("single node short-circuits to the MLP") {
    Tensor one(1, 6);
    for (std::size_t c = 0; c < 6; ++c) one[c] = rng.normal();
    Tensor g = graph_readout(one, mlp, store);
    Tensor direct = mlp_apply_eager(one, mlp, store);
    CHECK(ad::max_abs_diff(g, direct) < 1e-14);
  }
  SUBCASE("mean pooling collapses duplicated nodes") {
    Tensor dup(3, 6);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < 6; ++c) dup.at(i, c) = nodes.at(0, c);
    Tensor single(1, 6);
    for (std::size_t c = 0; c < 6; ++c) single[c] = nodes.at(0, c);
    CHECK(ad::max_abs_diff(graph_readout(dup, mlp, store),
                           graph_readout(single, mlp, store)) < 1e-13);
  }
}
