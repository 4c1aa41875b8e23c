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

#include "molct.h"

#include <cstring>
#include <sstream>
#include <string>

#include "molct/dataset.hpp"
#include "molct/errors.hpp"
#include "molct/readout.hpp"
#include "molct/trainer.hpp"

struct molct_config {
  molct::RunConfig cfg;
};
struct molct_dataset {
  std::vector<molct::LabeledSample> samples;
};
struct molct_model {
  molct::BuiltModel built;
};

namespace {

thread_local std::string g_last_error;

molct_status fail(const std::exception& e, molct_status code) {
  g_last_error = e.what();
  return code;
}

template <typename Fn>
molct_status guarded(Fn&& fn) {
  try {
    fn();
    return MOLCT_OK;
  } catch (const molct::Error& e) {
    g_last_error = e.what();
    return static_cast<molct_status>(e.code());
  } catch (const std::exception& e) {
    return fail(e, MOLCT_NUMERIC_ERROR);
  }
}

molct_status copy_out(const std::string& s, char* buf, size_t bufsize) {
  if (!buf || bufsize == 0) {
    g_last_error = "output buffer is null or empty";
    return MOLCT_USAGE_ERROR;
  }
  const size_t n = std::min(bufsize - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
  return MOLCT_OK;
}

}  // namespace

extern "C" {

const char* molct_version(void) { return "1.0.0"; }

const char* molct_last_error(void) { return g_last_error.c_str(); }

molct_status molct_config_create(molct_config** out) {
  return guarded([&]() { *out = new molct_config{}; });
}

molct_status molct_config_load(const char* path, molct_config** out) {
  return guarded([&]() {
    if (!path) throw molct::UsageError("config path is null");
    auto* c = new molct_config{molct::parse_config_file(path)};
    *out = c;
  });
}

molct_status molct_config_set(molct_config* cfg, const char* key,
                              const char* value) {
  return guarded([&]() {
    if (!cfg || !key || !value)
      throw molct::UsageError("config_set: null argument");
    cfg->cfg.set(key, value);
  });
}

molct_status molct_config_get(const molct_config* cfg, const char* key,
                              char* buf, size_t bufsize) {
  if (!cfg || !key) {
    g_last_error = "config_get: null argument";
    return MOLCT_USAGE_ERROR;
  }
  const std::string text = molct::config_to_string(cfg->cfg);
  std::istringstream in(text);
  std::string line;
  const std::string prefix = std::string(key) + " = ";
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0)
      return copy_out(line.substr(prefix.size()), buf, bufsize);
  g_last_error = std::string("config_get: unknown key '") + key + "'";
  return MOLCT_USAGE_ERROR;
}

void molct_config_free(molct_config* cfg) { delete cfg; }

molct_status molct_dataset_load(const char* xyz_path,
                                const char* bonds_path_or_null,
                                molct_dataset** out) {
  return guarded([&]() {
    if (!xyz_path) throw molct::UsageError("dataset path is null");
    auto samples = molct::parse_extxyz(xyz_path);
    if (bonds_path_or_null && bonds_path_or_null[0])
      molct::attach_bonds(
          samples, molct::parse_bonds(bonds_path_or_null,
                                      samples.front().graph.n_particles()));
    *out = new molct_dataset{std::move(samples)};
  });
}

molct_status molct_dataset_save(const molct_dataset* ds, const char* xyz_path,
                                const char* bonds_path_or_null) {
  return guarded([&]() {
    if (!ds || !xyz_path) throw molct::UsageError("dataset_save: null argument");
    molct::write_extxyz(xyz_path, ds->samples);
    if (bonds_path_or_null && bonds_path_or_null[0])
      molct::write_bonds(bonds_path_or_null,
                         ds->samples.front().graph.relational_edges);
  });
}

size_t molct_dataset_size(const molct_dataset* ds) {
  return ds ? ds->samples.size() : 0;
}

void molct_dataset_free(molct_dataset* ds) { delete ds; }

molct_status molct_gen_toymm(const char* out_dir, uint64_t seed,
                             size_t n_samples, double noise) {
  return guarded([&]() {
    if (!out_dir) throw molct::UsageError("gen_toymm: out_dir is null");
    molct::gen_toymm_files(out_dir, seed, n_samples,
                           noise > 0.0 ? noise : 0.08);
  });
}

molct_status molct_train(const molct_config* cfg) {
  return guarded([&]() {
    if (!cfg) throw molct::UsageError("train: config is null");
    molct::TrainResult r = molct::train(cfg->cfg);
    if (!r.all_completed()) {
      std::string what = "training aborted:";
      for (const auto& s : r.seeds)
        if (!s.completed)
          what += " [seed " + std::to_string(s.seed) + ": " + s.failure + "]";
      throw molct::NumericError(what);
    }
  });
}

molct_status molct_evaluate(const char* model_path, const char* xyz_path,
                            const char* bonds_path_or_null,
                            const char* pred_csv_or_null,
                            const char* diag_csv_or_null,
                            double metrics_out[4]) {
  return guarded([&]() {
    if (!model_path || !xyz_path)
      throw molct::UsageError("evaluate: null path");
    molct::BuiltModel bm = molct::load_model(model_path);
    auto samples = molct::parse_extxyz(xyz_path);
    if (bonds_path_or_null && bonds_path_or_null[0])
      molct::attach_bonds(
          samples, molct::parse_bonds(bonds_path_or_null,
                                      samples.front().graph.n_particles()));
    molct::Metrics m = molct::evaluate_model(
        bm.model, bm.store, samples, bm.config.lambda,
        bm.config.ponder_weight, pred_csv_or_null ? pred_csv_or_null : "",
        diag_csv_or_null ? diag_csv_or_null : "");
    if (metrics_out) {
      metrics_out[0] = m.loss;
      metrics_out[1] = m.energy_mae;
      metrics_out[2] = m.force_mae;
      metrics_out[3] = m.mean_ponder;
    }
  });
}

molct_status molct_ablate(const molct_config* cfg, const char* variants_csv) {
  return guarded([&]() {
    if (!cfg || !variants_csv) throw molct::UsageError("ablate: null argument");
    std::vector<std::string> variants;
    std::stringstream ss(variants_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) variants.push_back(tok);
    molct::ablate(cfg->cfg, variants);
  });
}

molct_status molct_gradcheck(const molct_config* cfg_or_null,
                             double errors_out[3]) {
  return guarded([&]() {
    molct::GradcheckReport rep =
        molct::gradcheck(cfg_or_null ? &cfg_or_null->cfg : nullptr);
    if (errors_out) {
      errors_out[0] = rep.force_err;
      errors_out[1] = rep.param_first_err;
      errors_out[2] = rep.param_second_err;
    }
    if (!rep.pass)
      throw molct::NumericError(
          "gradient check failed: forces " + std::to_string(rep.force_err) +
          " (tol 1e-5), params " + std::to_string(rep.param_first_err) +
          " (tol 1e-5), force-loss params " +
          std::to_string(rep.param_second_err) + " (tol 1e-4)");
  });
}

molct_status molct_param_count(const molct_config* cfg, char* buf,
                               size_t bufsize) {
  if (!cfg) {
    g_last_error = "param_count: config is null";
    return MOLCT_USAGE_ERROR;
  }
  try {
    molct::ParamCountReport rep = molct::param_count(cfg->cfg);
    std::ostringstream out;
    for (const auto& g : rep.groups)
      out << g.group << " " << g.count << "\n";
    out << "total " << rep.total << "\n";
    return copy_out(out.str(), buf, bufsize);
  } catch (const molct::Error& e) {
    g_last_error = e.what();
    return static_cast<molct_status>(e.code());
  } catch (const std::exception& e) {
    return fail(e, MOLCT_NUMERIC_ERROR);
  }
}

molct_status molct_featurize_export(const char* xyz_path,
                                    const char* bonds_path_or_null,
                                    const char* out_csv,
                                    const molct_config* cfg_or_null) {
  return guarded([&]() {
    if (!xyz_path || !out_csv)
      throw molct::UsageError("featurize: null path");
    molct::RunConfig def;
    molct::featurize_export(
        xyz_path, bonds_path_or_null ? bonds_path_or_null : "", out_csv,
        cfg_or_null ? cfg_or_null->cfg : def);
  });
}

molct_status molct_model_load(const char* path, molct_model** out) {
  return guarded([&]() {
    if (!path) throw molct::UsageError("model path is null");
    auto* m = new molct_model{molct::load_model(path)};
    *out = m;
  });
}

void molct_model_free(molct_model* m) { delete m; }

molct_status molct_model_predict(const molct_model* m, size_t n_atoms,
                                 const int32_t* species, const double* coords,
                                 size_t n_bonds, const int32_t* bonds,
                                 double* energy_out, double* forces_out) {
  return guarded([&]() {
    if (!m || !species || !coords || !energy_out)
      throw molct::UsageError("predict: null argument");
    molct::MolecularGraph g;
    g.species.resize(n_atoms);
    g.coords = molct::ad::Tensor(n_atoms, 3);
    for (size_t i = 0; i < n_atoms; ++i) {
      if (species[i] < 0) throw molct::DataError("predict: negative species");
      g.species[i] = static_cast<std::uint32_t>(species[i]);
      for (size_t c = 0; c < 3; ++c)
        g.coords.at(i, c) = coords[3 * i + c];
    }
    for (size_t b = 0; b < n_bonds; ++b) {
      const int32_t i = bonds[3 * b], j = bonds[3 * b + 1],
                    t = bonds[3 * b + 2];
      if (i < 0 || j < 0 || t < 0)
        throw molct::DataError("predict: negative bond field");
      g.relational_edges.push_back({static_cast<std::uint32_t>(i),
                                    static_cast<std::uint32_t>(j),
                                    static_cast<std::uint32_t>(t)});
    }
    molct::EnergyForcePrediction pred =
        molct::predict_energy_forces(g, m->built.model, m->built.store);
    *energy_out = pred.total_energy;
    if (forces_out)
      for (size_t i = 0; i < n_atoms * 3; ++i) forces_out[i] = pred.forces[i];
  });
}

}  // extern "C"
