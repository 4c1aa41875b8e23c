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

#ifndef MOLCT_DATASET_HPP
#define MOLCT_DATASET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "molct/featurize.hpp"

namespace molct {

struct LabeledSample {
  MolecularGraph graph;
  double energy = 0.0;
  ad::Tensor forces;  // N x 3
};

// Element symbol <-> atomic number (H..Rn).
std::uint32_t element_number(const std::string& symbol);  // throws DataError
const std::string& element_symbol(std::uint32_t z);

// Extended-XYZ frames: atom count, properties line with energy=<float>, then
// one "<symbol> x y z fx fy fz" line per atom. Errors carry line numbers.
std::vector<LabeledSample> parse_extxyz(const std::string& path);
void write_extxyz(const std::string& path,
                  const std::vector<LabeledSample>& samples);

// Bond sidecar: one "i j type_id" line per undirected bond (0-based), '#'
// comments allowed. Expanded to directed edges in both directions.
std::vector<RelationalEdge> parse_bonds(const std::string& path,
                                        std::size_t n_atoms);
void write_bonds(const std::string& path,
                 const std::vector<RelationalEdge>& edges);
void attach_bonds(std::vector<LabeledSample>& samples,
                  const std::vector<RelationalEdge>& edges);

// Minimal molecular-mechanics oracle: harmonic bonds and angles, plus
// Lennard-Jones and Coulomb terms on an explicit nonbonded pair list.
struct BondTerm {
  std::uint32_t i = 0, j = 0;
  double k = 0.0, r0 = 0.0;
};
struct AngleTerm {  // angle centered at j
  std::uint32_t i = 0, j = 0, k_idx = 0;
  double k = 0.0, theta0 = 0.0;
};
struct PairTerm {
  std::uint32_t i = 0, j = 0;
  double eps = 0.0, sigma = 0.0, qq = 0.0;  // qq = q_i * q_j
};
struct ToyForceField {
  std::vector<BondTerm> bonds;
  std::vector<AngleTerm> angles;
  std::vector<PairTerm> pairs;

  void validate(std::size_t n_atoms) const;
  // Same terms with every particle index remapped (used for the relational
  // witness check).
  ToyForceField permuted(const std::vector<std::uint32_t>& perm) const;
};

// "key = value" force-field file: bond = i j k r0; angle = i j k ka theta0;
// pair = i j eps sigma qq.
ToyForceField parse_forcefield(const std::string& path);
void write_forcefield(const std::string& path, const ToyForceField& ff);

// Energy and exact analytic forces. Throws on coincident particles.
std::pair<double, ad::Tensor> toy_mm_energy_forces(const MolecularGraph& g,
                                                   const ToyForceField& ff);

// A template molecule whose geometry is mirror-symmetric under swap_perm
// while the force-field constants are not: the labels depend on the bond
// topology in a way no relation-blind model can represent.
struct ToyMmTemplate {
  MolecularGraph graph;
  ToyForceField ff;
  std::vector<std::uint32_t> swap_perm;
  // Optional per-coordinate noise multipliers (N x 3). Must stay invariant
  // under the swap/mirror so perturbed samples cannot be told apart by their
  // sampling density alone.
  ad::Tensor noise_scale;
};

ToyMmTemplate witness_template();
// Two-atom harmonic molecule for smoke training.
ToyMmTemplate diatomic_template(double k = 50.0, double r0 = 0.9);

struct GenResult {
  std::vector<LabeledSample> samples;
  // |E(x; ff) - E(x; permuted ff)| on the first sample; certified positive.
  double witness_energy_gap = 0.0;
};

// Gaussian coordinate perturbations around the template, rejecting frames
// with any pair closer than min_dist; labels from the oracle; deterministic
// per seed.
GenResult gen_toy_mm_dataset(const ToyMmTemplate& tmpl, std::size_t n_samples,
                             double noise, std::uint64_t seed,
                             double min_dist = 0.5);

// Seeded shuffle then slice into disjoint train/validation sets.
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    const std::vector<LabeledSample>& dataset, std::size_t n_train,
    std::size_t n_val, std::uint64_t seed);

}  // namespace molct

#endif  // MOLCT_DATASET_HPP
