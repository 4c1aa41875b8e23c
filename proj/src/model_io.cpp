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

#include <cstring>
#include <fstream>

#include "molct/errors.hpp"
#include "molct/trainer.hpp"

namespace molct {

using ad::Tensor;

namespace {

constexpr char kMagic[8] = {'M', 'O', 'L', 'C', 'T', 'M', 'D', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw DataError("model file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void put_str(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  if (n > (1ull << 30)) throw DataError("model file: absurd string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("model file truncated");
  return s;
}

}  // namespace

void save_model(const std::string& path, const MolCtModel& model,
                const ParameterStore& store, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(kMagic, 8);
  put_u64(out, 1);  // format version
  put_str(out, config_to_string(cfg));
  put_f64(out, model.energy_shift);
  put_f64(out, model.scale);
  put_u64(out, model.species_remap.size());
  for (const auto& [sig, id] : model.species_remap) {
    put_str(out, sig);
    put_u64(out, id);
  }
  put_u64(out, store.count());
  for (std::size_t p = 0; p < store.count(); ++p) {
    const auto pid = static_cast<ParamId>(p);
    const Tensor& t = store.value(pid);
    put_str(out, store.name(pid));
    put_u64(out, t.rows());
    put_u64(out, t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

BuiltModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("'" + path + "' is not a molct model file");
  const std::uint64_t version = get_u64(in);
  if (version != 1)
    throw DataError("model format version " + std::to_string(version) +
                    " not supported");
  RunConfig cfg = parse_config_string(get_str(in), path + "@config");
  BuiltModel bm = build_model(cfg, 0);
  bm.model.energy_shift = get_f64(in);
  bm.model.scale = get_f64(in);
  const std::uint64_t n_remap = get_u64(in);
  for (std::uint64_t i = 0; i < n_remap; ++i) {
    std::string sig = get_str(in);
    bm.model.species_remap[sig] = static_cast<std::uint32_t>(get_u64(in));
  }
  const std::uint64_t n_tensors = get_u64(in);
  if (n_tensors != bm.store.count())
    throw DataError("model file: expected " +
                    std::to_string(bm.store.count()) + " tensors, found " +
                    std::to_string(n_tensors));
  for (std::uint64_t t = 0; t < n_tensors; ++t) {
    const std::string name = get_str(in);
    const ParamId pid = bm.store.find(name);
    if (pid < 0) throw DataError("model file: unknown parameter '" + name + "'");
    const std::uint64_t rows = get_u64(in), cols = get_u64(in);
    Tensor& dst = bm.store.mutable_value(pid);
    if (rows != dst.rows() || cols != dst.cols())
      throw DataError("model file: shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = get_f64(in);
  }
  return bm;
}

}  // namespace molct
