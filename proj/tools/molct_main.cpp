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

// molct command-line driver. Talks to the library exclusively through the C
// API in molct.h; exit codes are the molct_status values.

#include <CLI11.hpp>
#include <cstdio>
#include <memory>
#include <string>

#include "molct.h"

namespace {

struct ConfigHandle {
  molct_config* ptr = nullptr;
  ~ConfigHandle() { molct_config_free(ptr); }
};

int report(molct_status st) {
  if (st != MOLCT_OK) std::fprintf(stderr, "molct: %s\n", molct_last_error());
  return static_cast<int>(st);
}

int load_config(const std::string& path, ConfigHandle& h) {
  return report(path.empty() ? molct_config_create(&h.ptr)
                             : molct_config_load(path.c_str(), &h.ptr));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Molecular configuration transformer: training, evaluation "
               "and ablation driver"};
  app.require_subcommand(1);

  std::string config_path, model_path, data_path, bonds_path, out_path,
      variants, seed_override;

  auto* train = app.add_subcommand("train", "train per the config file");
  train->add_option("--config", config_path, "run configuration")->required();
  train->add_option("--seed", seed_override, "override the seeds list");

  auto* eval = app.add_subcommand("eval", "evaluate a saved model");
  eval->add_option("--model", model_path, "model file")->required();
  eval->add_option("--data", data_path, "extended-XYZ dataset")->required();
  eval->add_option("--bonds", bonds_path, "bond sidecar");
  std::string pred_csv, diag_csv;
  eval->add_option("--pred-out", pred_csv, "per-sample prediction CSV");
  eval->add_option("--diag-out", diag_csv, "halting/attention diagnostics CSV");

  auto* ablate = app.add_subcommand("ablate", "run named model variants");
  ablate->add_option("--config", config_path, "base configuration")->required();
  ablate->add_option("--variants", variants, "comma-separated variant names")
      ->required();

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--config", config_path, "model configuration");

  auto* featurize = app.add_subcommand("featurize", "export edge features");
  featurize->add_option("--data", data_path, "extended-XYZ dataset")
      ->required();
  featurize->add_option("--out", out_path, "output CSV")->required();
  featurize->add_option("--bonds", bonds_path, "bond sidecar");
  featurize->add_option("--config", config_path, "featurizer configuration");

  auto* pcount = app.add_subcommand("param-count", "per-module parameter counts");
  pcount->add_option("--config", config_path, "model configuration")
      ->required();

  auto* gen = app.add_subcommand("gen-toymm", "generate the toy MM dataset");
  gen->add_option("--out", out_path, "output directory")->required();
  std::uint64_t gen_seed = 0;
  std::size_t gen_samples = 2048;
  double gen_noise = 0.08;
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--samples", gen_samples, "number of frames");
  gen->add_option("--noise", gen_noise, "coordinate noise scale (Angstrom)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(MOLCT_USAGE_ERROR);
  }

  if (train->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, cfg)) return rc;
    if (!seed_override.empty()) {
      if (int rc = report(molct_config_set(cfg.ptr, "seeds",
                                           seed_override.c_str())))
        return rc;
    }
    return report(molct_train(cfg.ptr));
  }

  if (eval->parsed()) {
    double metrics[4] = {0, 0, 0, 0};
    const int rc = report(molct_evaluate(
        model_path.c_str(), data_path.c_str(),
        bonds_path.empty() ? nullptr : bonds_path.c_str(),
        pred_csv.empty() ? nullptr : pred_csv.c_str(),
        diag_csv.empty() ? nullptr : diag_csv.c_str(), metrics));
    if (rc == 0)
      std::printf("loss %.12g\nenergy_mae %.12g\nforce_mae %.12g\n"
                  "mean_ponder_steps %.12g\n",
                  metrics[0], metrics[1], metrics[2], metrics[3]);
    return rc;
  }

  if (ablate->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, cfg)) return rc;
    return report(molct_ablate(cfg.ptr, variants.c_str()));
  }

  if (gradcheck->parsed()) {
    ConfigHandle cfg;
    if (!config_path.empty()) {
      if (int rc = load_config(config_path, cfg)) return rc;
    }
    double errs[3] = {0, 0, 0};
    const molct_status st = molct_gradcheck(cfg.ptr, errs);
    std::printf("forces_vs_fd %.3e (tol 1e-5)\n"
                "param_grads_vs_fd %.3e (tol 1e-5)\n"
                "force_loss_param_grads_vs_fd %.3e (tol 1e-4)\n",
                errs[0], errs[1], errs[2]);
    return report(st);
  }

  if (featurize->parsed()) {
    ConfigHandle cfg;
    if (!config_path.empty()) {
      if (int rc = load_config(config_path, cfg)) return rc;
    }
    return report(molct_featurize_export(
        data_path.c_str(), bonds_path.empty() ? nullptr : bonds_path.c_str(),
        out_path.c_str(), cfg.ptr));
  }

  if (pcount->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, cfg)) return rc;
    char buf[8192];
    const int rc = report(molct_param_count(cfg.ptr, buf, sizeof buf));
    if (rc == 0) std::fputs(buf, stdout);
    return rc;
  }

  if (gen->parsed())
    return report(molct_gen_toymm(out_path.c_str(), gen_seed, gen_samples,
                                  gen_noise));

  return static_cast<int>(MOLCT_USAGE_ERROR);
}
