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

#ifndef MOLCT_TESTS_HELPERS_HPP
#define MOLCT_TESTS_HELPERS_HPP

#include <cmath>
#include <vector>

#include "molct/featurize.hpp"
#include "molct/rng.hpp"
#include "molct/tensor.hpp"

namespace molct::test {

// Proper rotation via Rodrigues' formula around a random axis.
inline ad::Tensor random_rotation(Rng& rng) {
  double ax = rng.normal(), ay = rng.normal(), az = rng.normal();
  const double norm = std::sqrt(ax * ax + ay * ay + az * az) + 1e-300;
  ax /= norm;
  ay /= norm;
  az /= norm;
  const double th = rng.uniform(0.0, 2.0 * M_PI);
  const double c = std::cos(th), s = std::sin(th), t = 1.0 - c;
  return ad::Tensor::from(
      3, 3,
      {t * ax * ax + c, t * ax * ay - s * az, t * ax * az + s * ay,
       t * ax * ay + s * az, t * ay * ay + c, t * ay * az - s * ax,
       t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c});
}

inline MolecularGraph apply_isometry(const MolecularGraph& g,
                                     const ad::Tensor& rot, double tx,
                                     double ty, double tz) {
  MolecularGraph out = g;
  for (std::size_t i = 0; i < g.n_particles(); ++i) {
    double p[3] = {g.coords.at(i, 0), g.coords.at(i, 1), g.coords.at(i, 2)};
    for (std::size_t r = 0; r < 3; ++r)
      out.coords.at(i, r) = rot.at(r, 0) * p[0] + rot.at(r, 1) * p[1] +
                            rot.at(r, 2) * p[2] + (r == 0 ? tx : r == 1 ? ty : tz);
  }
  return out;
}

inline MolecularGraph permute_graph(const MolecularGraph& g,
                                    const std::vector<std::uint32_t>& perm) {
  MolecularGraph out;
  const std::size_t n = g.n_particles();
  out.species.resize(n);
  out.coords = ad::Tensor(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    out.species[perm[i]] = g.species[i];
    for (std::size_t c = 0; c < 3; ++c)
      out.coords.at(perm[i], c) = g.coords.at(i, c);
  }
  for (const auto& e : g.relational_edges)
    out.relational_edges.push_back({perm[e.i], perm[e.j], e.type});
  return out;
}

// Random molecule with a minimum pairwise separation; optionally a simple
// bond chain with alternating types.
inline MolecularGraph random_molecule(Rng& rng, std::size_t n,
                                      bool with_bonds = false,
                                      double box = 3.0,
                                      double min_dist = 0.8) {
  MolecularGraph g;
  g.species.resize(n);
  g.coords = ad::Tensor(n, 3);
  const std::uint32_t kinds[3] = {1, 6, 8};
  for (std::size_t i = 0; i < n; ++i) {
    g.species[i] = kinds[rng.below(3)];
    for (;;) {
      for (std::size_t c = 0; c < 3; ++c)
        g.coords.at(i, c) = rng.uniform(-box, box);
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double d = g.coords.at(i, c) - g.coords.at(j, c);
          r2 += d * d;
        }
        if (r2 < min_dist * min_dist) ok = false;
      }
      if (ok) break;
    }
  }
  if (with_bonds)
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto t = static_cast<std::uint32_t>(i % 2);
      g.relational_edges.push_back({static_cast<std::uint32_t>(i),
                                    static_cast<std::uint32_t>(i + 1), t});
      g.relational_edges.push_back({static_cast<std::uint32_t>(i + 1),
                                    static_cast<std::uint32_t>(i), t});
    }
  return g;
}

}  // namespace molct::test

#endif  // MOLCT_TESTS_HELPERS_HPP
