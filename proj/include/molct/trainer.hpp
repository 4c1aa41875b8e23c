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

#ifndef MOLCT_TRAINER_HPP
#define MOLCT_TRAINER_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "molct/dataset.hpp"
#include "molct/niu.hpp"

namespace molct {

// Flat key = value run configuration; unknown keys are usage errors.
struct RunConfig {
  // data
  std::string data;       // extended-XYZ path
  std::string bonds;      // optional sidecar
  std::string out_dir = "molct_out";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  std::uint64_t split_seed = 0;
  std::size_t n_train = 1024;
  std::size_t n_val = 1024;
  // model
  std::size_t node_dim = 32;
  std::size_t edge_dim = 32;
  std::size_t heads = 8;
  std::size_t rme_blocks = 1;
  std::string op = "niu";  // ea | cfc | niu
  std::size_t blocks = 1;
  int iterations = 3;  // tied repeats (ea/cfc) or halting cap (niu)
  bool use_ffn = false;
  std::size_t ffn_hidden = 0;     // 0 = 2 * node_dim
  std::size_t cfc_filters = 0;    // 0 = 2 * node_dim
  std::size_t ponder_hidden = 0;  // 0 = max(2, node_dim / 8)
  double halt_epsilon = 0.01;
  double ponder_weight = 0.001;
  double lambda = 0.99;
  double r_min = 0.5;
  double r_cut = 10.0;
  double sigma = 0.0;
  std::string featurization = "logr";  // logr | r
  std::size_t species_vocab = 100;
  std::size_t relation_vocab = 8;
  bool artificial_species = false;
  // optimizer
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t steps = 5000;
  std::size_t val_every = 250;
  std::size_t threads = 0;  // 0 = MOLCT_THREADS env, else hardware

  void set(const std::string& key, const std::string& value);
  void validate() const;
  FeaturizerConfig featurizer() const;
  std::size_t effective_threads() const;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_string(const std::string& text,
                              const std::string& origin = "<config>");
std::string config_to_string(const RunConfig& cfg);

// A model plus its parameter store and the config it was built from.
struct BuiltModel {
  MolCtModel model;
  ParameterStore store;
  RunConfig config;
};

BuiltModel build_model(const RunConfig& cfg, std::uint64_t seed);

// Binary model file: config snapshot, standardization constants, species
// remap, and every parameter tensor by name. Loading reproduces predictions
// bit for bit.
void save_model(const std::string& path, const MolCtModel& model,
                const ParameterStore& store, const RunConfig& cfg);
BuiltModel load_model(const std::string& path);

struct Metrics {
  double loss = 0.0;           // standardized units, Eq.-14 form
  double energy_mae = 0.0;     // dataset units
  double force_mae = 0.0;      // dataset units, per component
  double mean_ponder = 0.0;    // mean halting steps
  double force_mse_std = 0.0;  // standardized units, per component
};

Metrics evaluate_model(const MolCtModel& model, const ParameterStore& store,
                       const std::vector<LabeledSample>& data, double lambda,
                       double ponder_weight,
                       const std::string& pred_csv = "",
                       const std::string& diag_csv = "");

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool completed = false;
  std::string failure;          // NaN-loss diagnostics when aborted
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  std::string model_path;
};

struct TrainResult {
  std::vector<SeedOutcome> seeds;
  bool all_completed() const {
    for (const auto& s : seeds)
      if (!s.completed) return false;
    return !seeds.empty();
  }
};

// Multi-seed minibatch Adam on the energy/force loss; writes per-seed metric
// CSVs, per-seed model files, and a cross-seed aggregate CSV into out_dir.
TrainResult train(const RunConfig& cfg);

// Named ablation variants (cfc-r, cfc-logr, ea-tied, ea-stacked, niu-1,
// niu-3, rme-on, rme-off, artificial-atom-types); each runs the full seed
// matrix on the same split and reports final losses plus parameter counts.
struct AblateRow {
  std::string variant;
  std::size_t param_total = 0;
  double train_loss_mean = 0.0, train_loss_std = 0.0;
  double val_loss_mean = 0.0, val_loss_std = 0.0;
};
std::vector<AblateRow> ablate(const RunConfig& cfg,
                              const std::vector<std::string>& variants);
RunConfig variant_config(const RunConfig& base, const std::string& variant);

// Finite-difference verification of every gradient path: forces against
// energy differences, first-order parameter gradients of the energy, and the
// force-loss parameter gradients that require differentiating through the
// inner gradient.
struct GradcheckReport {
  double force_err = 0.0;         // tolerance 1e-5
  double param_first_err = 0.0;   // tolerance 1e-5
  double param_second_err = 0.0;  // tolerance 1e-4
  bool pass = false;
};
GradcheckReport gradcheck(const RunConfig* cfg = nullptr);

struct ParamCountGroup {
  std::string group;
  std::size_t count = 0;
};
struct ParamCountReport {
  std::vector<ParamCountGroup> groups;
  std::size_t total = 0;
};
ParamCountReport param_count(const RunConfig& cfg);

// Per-pair featurization export (frame,i,j,r,cutoff,e_0..e_{d-1}).
void featurize_export(const std::string& data_path,
                      const std::string& bonds_path,
                      const std::string& out_csv, const RunConfig& cfg);

// gen-toymm driver: writes toymm.xyz, toymm_bonds.txt and toymm_ff.txt.
void gen_toymm_files(const std::string& out_dir, std::uint64_t seed,
                     std::size_t n_samples, double noise = 0.08);

}  // namespace molct

#endif  // MOLCT_TRAINER_HPP
