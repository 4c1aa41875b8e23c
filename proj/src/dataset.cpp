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

#include "molct/dataset.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "molct/errors.hpp"
#include "molct/rng.hpp"

namespace molct {

using ad::Tensor;

namespace {

const std::array<std::string, 87> kElements = {
    "X",  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na",
    "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",
    "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br",
    "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag",
    "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu",
    "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi",
    "Po", "At", "Rn"};

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::uint32_t element_number(const std::string& symbol) {
  for (std::size_t z = 1; z < kElements.size(); ++z)
    if (kElements[z] == symbol) return static_cast<std::uint32_t>(z);
  throw DataError("unknown element symbol '" + symbol + "'");
}

const std::string& element_symbol(std::uint32_t z) {
  if (z == 0 || z >= kElements.size())
    throw DataError("atomic number " + std::to_string(z) +
                    " outside symbol table");
  return kElements[z];
}

std::vector<LabeledSample> parse_extxyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<LabeledSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Skip blank separator lines between frames.
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream count_ss(line);
    long n = -1;
    if (!(count_ss >> n) || n < 1)
      parse_fail(path, lineno, "expected atom count, got '" + line + "'");
    if (!std::getline(in, line))
      parse_fail(path, lineno + 1, "missing properties line");
    ++lineno;
    const auto pos = line.find("energy=");
    if (pos == std::string::npos)
      parse_fail(path, lineno, "properties line lacks energy=<float>");
    double energy = 0.0;
    {
      std::istringstream ess(line.substr(pos + 7));
      if (!(ess >> energy))
        parse_fail(path, lineno, "cannot parse energy value");
    }
    LabeledSample sample;
    sample.energy = energy;
    sample.graph.species.resize(n);
    sample.graph.coords = Tensor(n, 3);
    sample.forces = Tensor(n, 3);
    for (long a = 0; a < n; ++a) {
      if (!std::getline(in, line))
        parse_fail(path, lineno + 1,
                   "frame truncated: expected " + std::to_string(n) +
                       " atom lines");
      ++lineno;
      std::istringstream ss(line);
      std::string sym;
      double x, y, z, fx, fy, fz;
      if (!(ss >> sym >> x >> y >> z >> fx >> fy >> fz))
        parse_fail(path, lineno,
                   "expected '<symbol> x y z fx fy fz', got '" + line + "'");
      std::string extra;
      if (ss >> extra)
        parse_fail(path, lineno, "trailing fields after forces");
      try {
        sample.graph.species[a] = element_number(sym);
      } catch (const DataError& e) {
        parse_fail(path, lineno, e.what());
      }
      sample.graph.coords.at(a, 0) = x;
      sample.graph.coords.at(a, 1) = y;
      sample.graph.coords.at(a, 2) = z;
      sample.forces.at(a, 0) = fx;
      sample.forces.at(a, 1) = fy;
      sample.forces.at(a, 2) = fz;
    }
    if (!sample.graph.coords.all_finite() || !sample.forces.all_finite() ||
        !std::isfinite(energy))
      parse_fail(path, lineno, "non-finite values in frame");
    out.push_back(std::move(sample));
  }
  if (out.empty()) throw DataError(path + ": no frames found");
  return out;
}

void write_extxyz(const std::string& path,
                  const std::vector<LabeledSample>& samples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& s : samples) {
    const std::size_t n = s.graph.n_particles();
    out << n << "\n";
    out << "Properties=species:S:1:pos:R:3:forces:R:3 energy="
        << fmt_g17(s.energy) << "\n";
    for (std::size_t a = 0; a < n; ++a) {
      out << element_symbol(s.graph.species[a]);
      for (std::size_t c = 0; c < 3; ++c)
        out << " " << fmt_g17(s.graph.coords.at(a, c));
      for (std::size_t c = 0; c < 3; ++c)
        out << " " << fmt_g17(s.forces.at(a, c));
      out << "\n";
    }
  }
}

std::vector<RelationalEdge> parse_bonds(const std::string& path,
                                        std::size_t n_atoms) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<RelationalEdge> out;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long i, j, t;
    if (!(ss >> i >> j >> t) || i < 0 || j < 0 || t < 0)
      parse_fail(path, lineno, "expected 'i j type_id'");
    if (static_cast<std::size_t>(i) >= n_atoms ||
        static_cast<std::size_t>(j) >= n_atoms)
      parse_fail(path, lineno, "atom index out of range (N = " +
                                   std::to_string(n_atoms) + ")");
    if (i == j) parse_fail(path, lineno, "self bond");
    auto a = static_cast<std::uint32_t>(std::min(i, j));
    auto b = static_cast<std::uint32_t>(std::max(i, j));
    if (!seen.insert({a, b}).second)
      parse_fail(path, lineno, "duplicate bond " + std::to_string(i) + "-" +
                                   std::to_string(j));
    out.push_back({static_cast<std::uint32_t>(i),
                   static_cast<std::uint32_t>(j),
                   static_cast<std::uint32_t>(t)});
    out.push_back({static_cast<std::uint32_t>(j),
                   static_cast<std::uint32_t>(i),
                   static_cast<std::uint32_t>(t)});
  }
  return out;
}

void write_bonds(const std::string& path,
                 const std::vector<RelationalEdge>& edges) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& e : edges) {
    const auto a = std::min(e.i, e.j), b = std::max(e.i, e.j);
    if (!seen.insert({a, b}).second) continue;
    out << a << " " << b << " " << e.type << "\n";
  }
}

void attach_bonds(std::vector<LabeledSample>& samples,
                  const std::vector<RelationalEdge>& edges) {
  for (auto& s : samples) {
    for (const auto& e : edges)
      if (e.i >= s.graph.n_particles() || e.j >= s.graph.n_particles())
        throw DataError("bond index out of range for frame with N = " +
                        std::to_string(s.graph.n_particles()));
    s.graph.relational_edges = edges;
  }
}

void ToyForceField::validate(std::size_t n) const {
  auto in_range = [n](std::uint32_t i) { return i < n; };
  for (const auto& b : bonds) {
    if (!in_range(b.i) || !in_range(b.j) || b.i == b.j)
      throw DataError("force field: bad bond indices");
    if (b.k < 0.0 || b.r0 <= 0.0)
      throw DataError("force field: bond needs k >= 0, r0 > 0");
  }
  for (const auto& a : angles) {
    if (!in_range(a.i) || !in_range(a.j) || !in_range(a.k_idx) ||
        a.i == a.j || a.j == a.k_idx || a.i == a.k_idx)
      throw DataError("force field: bad angle indices");
    if (a.k < 0.0) throw DataError("force field: angle needs k >= 0");
  }
  for (const auto& p : pairs) {
    if (!in_range(p.i) || !in_range(p.j) || p.i == p.j)
      throw DataError("force field: bad pair indices");
    if (p.eps < 0.0 || p.sigma <= 0.0)
      throw DataError("force field: pair needs eps >= 0, sigma > 0");
  }
}

ToyForceField ToyForceField::permuted(
    const std::vector<std::uint32_t>& perm) const {
  ToyForceField out = *this;
  for (auto& b : out.bonds) {
    b.i = perm[b.i];
    b.j = perm[b.j];
  }
  for (auto& a : out.angles) {
    a.i = perm[a.i];
    a.j = perm[a.j];
    a.k_idx = perm[a.k_idx];
  }
  for (auto& p : out.pairs) {
    p.i = perm[p.i];
    p.j = perm[p.j];
  }
  return out;
}

ToyForceField parse_forcefield(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  ToyForceField ff;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_fail(path, lineno, "expected key = value");
    std::istringstream key_ss(line.substr(0, eq));
    std::string key;
    key_ss >> key;
    std::istringstream val(line.substr(eq + 1));
    if (key == "bond") {
      BondTerm b;
      if (!(val >> b.i >> b.j >> b.k >> b.r0))
        parse_fail(path, lineno, "bond needs 'i j k r0'");
      ff.bonds.push_back(b);
    } else if (key == "angle") {
      AngleTerm a;
      if (!(val >> a.i >> a.j >> a.k_idx >> a.k >> a.theta0))
        parse_fail(path, lineno, "angle needs 'i j k ka theta0'");
      ff.angles.push_back(a);
    } else if (key == "pair") {
      PairTerm p;
      if (!(val >> p.i >> p.j >> p.eps >> p.sigma >> p.qq))
        parse_fail(path, lineno, "pair needs 'i j eps sigma qq'");
      ff.pairs.push_back(p);
    } else {
      parse_fail(path, lineno, "unknown force-field key '" + key + "'");
    }
  }
  return ff;
}

void write_forcefield(const std::string& path, const ToyForceField& ff) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& b : ff.bonds)
    out << "bond = " << b.i << " " << b.j << " " << fmt_g17(b.k) << " "
        << fmt_g17(b.r0) << "\n";
  for (const auto& a : ff.angles)
    out << "angle = " << a.i << " " << a.j << " " << a.k_idx << " "
        << fmt_g17(a.k) << " " << fmt_g17(a.theta0) << "\n";
  for (const auto& p : ff.pairs)
    out << "pair = " << p.i << " " << p.j << " " << fmt_g17(p.eps) << " "
        << fmt_g17(p.sigma) << " " << fmt_g17(p.qq) << "\n";
}

namespace {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator*(double c) const { return {x * c, y * c, z * c}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

Vec3 atom(const Tensor& coords, std::uint32_t i) {
  return {coords.at(i, 0), coords.at(i, 1), coords.at(i, 2)};
}

void add_force(Tensor& f, std::uint32_t i, const Vec3& v) {
  f.at(i, 0) += v.x;
  f.at(i, 1) += v.y;
  f.at(i, 2) += v.z;
}

}  // namespace

std::pair<double, Tensor> toy_mm_energy_forces(const MolecularGraph& g,
                                               const ToyForceField& ff) {
  const std::size_t n = g.n_particles();
  ff.validate(n);
  double energy = 0.0;
  Tensor forces(n, 3);

  auto radial = [&](std::uint32_t i, std::uint32_t j, double dEdr) {
    const Vec3 rij = atom(g.coords, i) - atom(g.coords, j);
    const double r = rij.norm();
    const Vec3 dir = rij * (1.0 / r);
    add_force(forces, i, dir * (-dEdr));
    add_force(forces, j, dir * dEdr);
    return r;
  };

  for (const auto& b : ff.bonds) {
    const Vec3 rij = atom(g.coords, b.i) - atom(g.coords, b.j);
    const double r = rij.norm();
    if (r <= 0.0) throw DataError("toy_mm: coincident bonded particles");
    energy += b.k * (r - b.r0) * (r - b.r0);
    radial(b.i, b.j, 2.0 * b.k * (r - b.r0));
  }
  for (const auto& a : ff.angles) {
    const Vec3 u = atom(g.coords, a.i) - atom(g.coords, a.j);
    const Vec3 v = atom(g.coords, a.k_idx) - atom(g.coords, a.j);
    const double ru = u.norm(), rv = v.norm();
    if (ru <= 0.0 || rv <= 0.0)
      throw DataError("toy_mm: coincident particles in angle term");
    double c = u.dot(v) / (ru * rv);
    c = std::min(1.0 - 1e-12, std::max(-1.0 + 1e-12, c));
    const double s = std::sqrt(1.0 - c * c);
    const double theta = std::acos(c);
    energy += a.k * (theta - a.theta0) * (theta - a.theta0);
    const double dEdtheta = 2.0 * a.k * (theta - a.theta0);
    const Vec3 uhat = u * (1.0 / ru), vhat = v * (1.0 / rv);
    const Vec3 dthi = (uhat * c - vhat) * (1.0 / (ru * s));
    const Vec3 dthk = (vhat * c - uhat) * (1.0 / (rv * s));
    add_force(forces, a.i, dthi * (-dEdtheta));
    add_force(forces, a.k_idx, dthk * (-dEdtheta));
    add_force(forces, a.j, (dthi + dthk) * dEdtheta);
  }
  for (const auto& p : ff.pairs) {
    const Vec3 rij = atom(g.coords, p.i) - atom(g.coords, p.j);
    const double r = rij.norm();
    if (r <= 0.0) throw DataError("toy_mm: coincident nonbonded particles");
    const double sr6 = std::pow(p.sigma / r, 6.0);
    energy += 4.0 * p.eps * (sr6 * sr6 - sr6) + p.qq / r;
    const double dEdr =
        4.0 * p.eps * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r - p.qq / (r * r);
    radial(p.i, p.j, dEdr);
  }
  return {energy, forces};
}

ToyMmTemplate witness_template() {
  ToyMmTemplate t;
  // Two carbons in mirror-equivalent positions with different bond
  // environments: a stiff short C=O on one side, a soft long C-O on the
  // other. Geometry is symmetric under (mirror x -> -x) composed with
  // swap_perm; the force-field constants are not.
  t.graph.species = {6, 6, 8, 1, 1};  // C C O H H
  t.graph.coords = Tensor::from(5, 3,
                                {-1.2, 0.0, 0.0,   // C0
                                 1.2,  0.0, 0.0,   // C1
                                 0.0,  0.4, 0.0,   // O2
                                 -2.0, 0.7, 0.0,   // H3
                                 2.0,  0.7, 0.0}); // H4
  t.swap_perm = {1, 0, 2, 4, 3};
  auto bond = [&](std::uint32_t i, std::uint32_t j, std::uint32_t type) {
    t.graph.relational_edges.push_back({i, j, type});
    t.graph.relational_edges.push_back({j, i, type});
  };
  bond(0, 2, 1);  // C0=O2 (double)
  bond(1, 2, 0);  // C1-O2 (single)
  bond(0, 3, 0);
  bond(1, 4, 0);
  t.ff.bonds = {{0, 2, 300.0, 1.10},
                {1, 2, 150.0, 1.35},
                {0, 3, 250.0, 1.00},
                {1, 4, 250.0, 1.00}};
  t.ff.angles = {{2, 0, 3, 30.0, 2.0},
                 {2, 1, 4, 12.0, 2.3}};
  t.ff.pairs = {{0, 4, 0.01, 2.5, 0.02},
                {1, 3, 0.01, 2.5, 0.02},
                {3, 4, 0.01, 3.0, 0.02},
                {0, 1, 0.01, 2.2, 0.02}};
  // Wide out-of-plane hydrogen wobble (mirror-pair symmetric): separates
  // samples from their mirror twins in distance space without stretching the
  // stiff bonds, so labels keep no heavy tails.
  t.noise_scale = ad::Tensor::full(5, 3, 1.0);
  t.noise_scale.at(3, 2) = 2.5;
  t.noise_scale.at(4, 2) = 2.5;
  return t;
}

ToyMmTemplate diatomic_template(double k, double r0) {
  ToyMmTemplate t;
  t.graph.species = {1, 1};
  t.graph.coords = Tensor::from(2, 3, {0.0, 0.0, 0.0, r0, 0.0, 0.0});
  t.graph.relational_edges = {{0, 1, 0}, {1, 0, 0}};
  // Fully symmetric molecule: no relational witness to certify.
  t.ff.bonds = {{0, 1, k, r0}};
  return t;
}

GenResult gen_toy_mm_dataset(const ToyMmTemplate& tmpl, std::size_t n_samples,
                             double noise, std::uint64_t seed,
                             double min_dist) {
  const std::size_t n = tmpl.graph.n_particles();
  tmpl.ff.validate(n);
  Rng rng(seed);
  GenResult out;
  out.samples.reserve(n_samples);
  std::size_t attempts = 0;
  while (out.samples.size() < n_samples) {
    if (++attempts > 100 * n_samples + 1000)
      throw DataError("gen_toy_mm: rejection rate above 99%; "
                      "noise scale incompatible with min_dist");
    LabeledSample s;
    s.graph = tmpl.graph;
    const bool scaled = tmpl.noise_scale.rows() == n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        s.graph.coords.at(i, c) +=
            rng.normal(0.0, noise * (scaled ? tmpl.noise_scale.at(i, c) : 1.0));
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      for (std::size_t j = i + 1; j < n && ok; ++j) {
        const Vec3 d = atom(s.graph.coords, i) - atom(s.graph.coords, j);
        if (d.norm() < min_dist) ok = false;
      }
    if (!ok) continue;
    auto [e, f] = toy_mm_energy_forces(s.graph, tmpl.ff);
    s.energy = e;
    s.forces = std::move(f);
    out.samples.push_back(std::move(s));
  }

  // Relational witness: the same coordinates under the index-permuted bond
  // list must carry a different label, otherwise the dataset cannot separate
  // relation-aware from relation-blind models.
  if (!tmpl.swap_perm.empty()) {
    const auto& probe = out.samples.front().graph;
    const double e_a = toy_mm_energy_forces(probe, tmpl.ff).first;
    const double e_b =
        toy_mm_energy_forces(probe, tmpl.ff.permuted(tmpl.swap_perm)).first;
    out.witness_energy_gap = std::fabs(e_a - e_b);
    if (!(out.witness_energy_gap > 1e-9))
      throw DataError("gen_toy_mm: witness check failed; permuted bond list "
                      "gives identical labels");
  }
  return out;
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    const std::vector<LabeledSample>& dataset, std::size_t n_train,
    std::size_t n_val, std::uint64_t seed) {
  if (n_train + n_val > dataset.size())
    throw DataError("split: requested " + std::to_string(n_train) + "+" +
                    std::to_string(n_val) + " samples from a dataset of " +
                    std::to_string(dataset.size()));
  std::vector<std::size_t> idx(dataset.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<LabeledSample> train, val;
  train.reserve(n_train);
  val.reserve(n_val);
  for (std::size_t i = 0; i < n_train; ++i) train.push_back(dataset[idx[i]]);
  for (std::size_t i = 0; i < n_val; ++i)
    val.push_back(dataset[idx[n_train + i]]);
  return {std::move(train), std::move(val)};
}

}  // namespace molct
