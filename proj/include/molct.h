/*
 * Copyright 2026 The molct Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the molct shared library: opaque handles, integer status
 * codes, and driver calls mirroring the CLI subcommands. Status values double
 * as process exit codes. On failure, molct_last_error() returns a
 * thread-local description of what went wrong. */

#ifndef MOLCT_H
#define MOLCT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum molct_status {
  MOLCT_OK = 0,
  MOLCT_USAGE_ERROR = 1,   /* bad arguments, bad config keys */
  MOLCT_DATA_ERROR = 2,    /* unreadable or malformed inputs */
  MOLCT_NUMERIC_ERROR = 3  /* NaN loss, failed checks, contract violations */
} molct_status;

typedef struct molct_config molct_config;
typedef struct molct_dataset molct_dataset;
typedef struct molct_model molct_model;

const char* molct_version(void);
const char* molct_last_error(void);

/* -------- configuration (flat key = value) -------- */
molct_status molct_config_create(molct_config** out);
molct_status molct_config_load(const char* path, molct_config** out);
molct_status molct_config_set(molct_config* cfg, const char* key,
                              const char* value);
/* Writes the formatted value of one key into buf (NUL-terminated). */
molct_status molct_config_get(const molct_config* cfg, const char* key,
                              char* buf, size_t bufsize);
void molct_config_free(molct_config* cfg);

/* -------- datasets -------- */
molct_status molct_dataset_load(const char* xyz_path,
                                const char* bonds_path_or_null,
                                molct_dataset** out);
molct_status molct_dataset_save(const molct_dataset* ds, const char* xyz_path,
                                const char* bonds_path_or_null);
size_t molct_dataset_size(const molct_dataset* ds);
void molct_dataset_free(molct_dataset* ds);

/* Writes toymm.xyz, toymm_bonds.txt and toymm_ff.txt into out_dir. */
molct_status molct_gen_toymm(const char* out_dir, uint64_t seed,
                             size_t n_samples, double noise);

/* -------- drivers -------- */
molct_status molct_train(const molct_config* cfg);

/* metrics_out: loss, energy_mae, force_mae, mean_ponder_steps. */
molct_status molct_evaluate(const char* model_path, const char* xyz_path,
                            const char* bonds_path_or_null,
                            const char* pred_csv_or_null,
                            const char* diag_csv_or_null,
                            double metrics_out[4]);

molct_status molct_ablate(const molct_config* cfg, const char* variants_csv);

/* errors_out: worst relative error of the force, first-order parameter and
 * second-order force-loss suites. Returns MOLCT_NUMERIC_ERROR when any suite
 * exceeds its tolerance (1e-5 / 1e-5 / 1e-4). */
molct_status molct_gradcheck(const molct_config* cfg_or_null,
                             double errors_out[3]);

/* Human-readable per-group parameter counts. */
molct_status molct_param_count(const molct_config* cfg, char* buf,
                               size_t bufsize);

molct_status molct_featurize_export(const char* xyz_path,
                                    const char* bonds_path_or_null,
                                    const char* out_csv,
                                    const molct_config* cfg_or_null);

/* -------- prediction handles -------- */
molct_status molct_model_load(const char* path, molct_model** out);
void molct_model_free(molct_model* m);

/* species: n_atoms atomic numbers; coords: n_atoms*3 doubles (row-major);
 * bonds: n_bonds*3 int32 triples (i, j, type), one per direction or use
 * molct_dataset_load for the file-based path. energy_out: 1 double;
 * forces_out: n_atoms*3 doubles. */
molct_status molct_model_predict(const molct_model* m, size_t n_atoms,
                                 const int32_t* species, const double* coords,
                                 size_t n_bonds, const int32_t* bonds,
                                 double* energy_out, double* forces_out);

#ifdef __cplusplus
}
#endif

#endif /* MOLCT_H */
