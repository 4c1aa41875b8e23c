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

#include "helpers.hpp"
#include "molct/rme.hpp"

using namespace molct;
using ad::Graph;
using ad::NodeId;
using ad::Tensor;

namespace {

constexpr std::size_t kD = 8;
constexpr std::size_t kd = 6;

struct Fixture {
  ParameterStore store;
  RmeBlockParams block;
  ParamId relations = -1;
  Rng rng{101};

  Fixture() {
    block = RmeBlockParams::create(store, "rme0", kD, kd, 2, 16, rng);
    relations = store.add_normal("embed.relations", 4, kd, 0.5, rng);
  }

  Tensor run_block(const Tensor& z, const MolecularGraph& mol) {
    Graph g;
    LeafMap leaf(g, store);
    return g.value(
        rme_block(g, g.constant(z), mol, block, leaf, leaf(relations)));
  }
  Tensor run_stack(const Tensor& z, const MolecularGraph& mol,
                   const RmeStack& stack) {
    Graph g;
    LeafMap leaf(g, store);
    return g.value(
        rme_forward(g, g.constant(z), mol, stack, leaf, leaf(relations)));
  }
  Tensor rand_z(std::size_t n) {
    Tensor z(n, kD);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return z;
  }
};

}  // namespace

TEST_CASE("keys equal node vectors when no relational edges exist") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 4, false);
  Tensor z = f.rand_z(4);
  Graph g;
  LeafMap leaf(g, f.store);
  NodeId zc = g.constant(z);
  auto [k, v] = rme_keys_values(g, zc, mol, 1, f.block, leaf,
                                leaf(f.relations));
  CHECK(g.value(k) == z);
  CHECK(g.value(v) == z);
}

TEST_CASE("zero edge projections reduce keys and values to z") {
  Fixture f;
  f.store.mutable_value(f.block.w_k2).fill(0.0);
  f.store.mutable_value(f.block.w_v2).fill(0.0);
  MolecularGraph mol = test::random_molecule(f.rng, 4, true);
  Tensor z = f.rand_z(4);
  Graph g;
  LeafMap leaf(g, f.store);
  auto [k, v] = rme_keys_values(g, g.constant(z), mol, 1, f.block, leaf,
                                leaf(f.relations));
  CHECK(ad::max_abs_diff(g.value(k), z) == 0.0);
  CHECK(ad::max_abs_diff(g.value(v), z) == 0.0);
}

TEST_CASE("different bond patterns give different key sets") {
  Fixture f;
  // Two carbons: one double-bonded to O, the other single-bonded to H.
  MolecularGraph mol;
  mol.species = {6, 6, 8, 1};
  mol.coords = Tensor::from(4, 3, {0, 0, 0, 1.5, 0, 0, 0, 1.2, 0, 1.5, 1.0, 0});
  auto add = [&](std::uint32_t i, std::uint32_t j, std::uint32_t t) {
    mol.relational_edges.push_back({i, j, t});
    mol.relational_edges.push_back({j, i, t});
  };
  add(0, 2, 1);
  add(1, 3, 0);
  Tensor z = f.rand_z(4);
  // Same initial vector for both carbons.
  for (std::size_t c = 0; c < kD; ++c) z.at(1, c) = z.at(0, c);
  Graph g;
  LeafMap leaf(g, f.store);
  auto [k0, v0] = rme_keys_values(g, g.constant(z), mol, 0, f.block, leaf,
                                  leaf(f.relations));
  auto [k1, v1] = rme_keys_values(g, g.constant(z), mol, 1, f.block, leaf,
                                  leaf(f.relations));
  // Key rows of their respective neighbors differ (different relation type).
  CHECK(ad::max_abs_diff(g.value(k0), g.value(k1)) > 1e-4);
  (void)v0;
  (void)v1;
}

TEST_CASE("relation-aware update separates equal embeddings (sp2 vs sp3)") {
  Fixture f;
  MolecularGraph mol;
  mol.species = {6, 6, 8, 1};
  mol.coords = Tensor::from(4, 3, {0, 0, 0, 1.5, 0, 0, 0, 1.2, 0, 1.5, 1.0, 0});
  auto add = [&](std::uint32_t i, std::uint32_t j, std::uint32_t t) {
    mol.relational_edges.push_back({i, j, t});
    mol.relational_edges.push_back({j, i, t});
  };
  add(0, 1, 0);
  add(0, 2, 1);  // carbon 0 carries a double bond
  add(1, 3, 0);  // carbon 1 does not
  Tensor z = f.rand_z(4);
  for (std::size_t c = 0; c < kD; ++c) z.at(1, c) = z.at(0, c);
  Tensor out = f.run_block(z, mol);
  double diff = 0.0;
  for (std::size_t c = 0; c < kD; ++c)
    diff = std::max(diff, std::fabs(out.at(0, c) - out.at(1, c)));
  CHECK(diff > 1e-4);
}

TEST_CASE("distinct inputs stay distinct without relations") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 3, false);
  Tensor z = f.rand_z(3);
  Tensor out = f.run_block(z, mol);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) {
      double diff = 0.0;
      for (std::size_t c = 0; c < kD; ++c)
        diff = std::max(diff, std::fabs(out.at(a, c) - out.at(b, c)));
      CHECK(diff > 1e-6);
    }
}

TEST_CASE("empty stack is the identity") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 5, true);
  Tensor z = f.rand_z(5);
  CHECK(f.run_stack(z, mol, {}) == z);
}

TEST_CASE("output ignores coordinates entirely") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 5, true);
  Tensor z = f.rand_z(5);
  RmeStack stack = {f.block};
  Tensor a = f.run_stack(z, mol, stack);
  MolecularGraph moved = mol;
  for (std::size_t i = 0; i < moved.coords.size(); ++i)
    moved.coords[i] += f.rng.normal(0.0, 10.0);
  Tensor b = f.run_stack(z, moved, stack);
  CHECK(a == b);  // bitwise
}

TEST_CASE("repeated evaluation is bitwise deterministic") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 4, true);
  Tensor z = f.rand_z(4);
  CHECK(f.run_block(z, mol) == f.run_block(z, mol));
}

TEST_CASE("one parameter set serves any particle count") {
  Fixture f;
  RmeStack stack = {f.block};
  for (std::size_t n : {2UL, 5UL, 30UL}) {
    MolecularGraph mol = test::random_molecule(f.rng, n, true, 6.0);
    Tensor out = f.run_stack(f.rand_z(n), mol, stack);
    CHECK(out.rows() == n);
    CHECK(out.cols() == kD);
    CHECK(out.all_finite());
  }
}

TEST_CASE("permutation equivariance") {
  Fixture f;
  MolecularGraph mol = test::random_molecule(f.rng, 5, true);
  Tensor z = f.rand_z(5);
  std::vector<std::uint32_t> perm = {2, 4, 0, 1, 3};
  MolecularGraph pmol = test::permute_graph(mol, perm);
  Tensor pz(5, kD);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < kD; ++c) pz.at(perm[i], c) = z.at(i, c);
  Tensor a = f.run_block(z, mol);
  Tensor b = f.run_block(pz, pmol);
  double worst = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < kD; ++c)
      worst = std::max(worst,
                       std::fabs(a.at(i, c) - b.at(perm[i], c)));
  CHECK(worst < 1e-10);
}
