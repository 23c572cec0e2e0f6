// Copyright 2026 The lyapguard Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef LYAPGUARD_LYAPGUARD_H_
#define LYAPGUARD_LYAPGUARD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(LYAPGUARD_BUILDING)
#define LG_API __attribute__((visibility("default")))
#else
#define LG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returning lg_status leaves a message in
 * lg_last_error() (per thread) when the result is not LG_OK. */
typedef enum lg_status {
  LG_OK = 0,
  LG_INVALID_ARGUMENT = 1,
  LG_BAD_MAGIC = 2,
  LG_TRUNCATED_STREAM = 3,
  LG_COUNT_MISMATCH = 4,
  LG_UNREADABLE_FILE = 5,
  LG_BAD_DIMENSIONS = 6,
  LG_OUT_OF_RANGE_PIXEL = 7,
  LG_SERIES_TOO_SHORT = 8,
  LG_NOT_ENOUGH_NEIGHBORS = 9,
  LG_DEGENERATE_NEIGHBORHOOD = 10,
  LG_ZERO_VARIANCE = 11,
  LG_DIM_MISMATCH = 12,
  LG_BAD_PARAM = 13,
  LG_EMPTY_DISTANCES = 14,
  LG_DIM_TOO_LARGE = 15,
  LG_DEGENERATE_DATA = 16,
  LG_TOO_FEW_POINTS = 17,
  LG_BAD_CONTAMINATION = 18,
  LG_SINGLE_CLASS = 19,
  LG_NO_CONVERGENCE = 20,
  LG_LENGTH_MISMATCH = 21,
  LG_TOO_FEW_ATTACKS = 22,
  LG_MISSING_LABEL = 23,
  LG_EMPTY_INPUT = 24,
  LG_CONFIG = 25,
  LG_IO = 26,
  LG_FORMAT = 27,
  LG_PARTIAL_FAILURE = 28,
  LG_INTERNAL = 99
} lg_status;

LG_API const char* lg_status_name(lg_status status);
LG_API const char* lg_last_error(void);
LG_API const char* lg_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
LG_API void lg_string_free(char* s);

/* ---- datasets ---- */

typedef struct lg_dataset lg_dataset;

/* labels_path may be NULL. */
LG_API lg_status lg_dataset_load_idx(const char* images_path, const char* labels_path,
                                     lg_dataset** out);
/* descriptor_json: {"scaling": "none"|"byte255", "provenance": ...}; NULL means no scaling. */
LG_API lg_status lg_dataset_load_dir(const char* dir, const char* descriptor_json, lg_dataset** out);
LG_API size_t lg_dataset_count(const lg_dataset* ds);
LG_API lg_status lg_dataset_shape(const lg_dataset* ds, size_t index, size_t* height, size_t* width);
/* Pointer stays valid until lg_dataset_free. */
LG_API lg_status lg_dataset_pixels(const lg_dataset* ds, size_t index, const double** pixels,
                                   size_t* count);
/* Writes -1 when the image has no label. */
LG_API lg_status lg_dataset_label(const lg_dataset* ds, size_t index, int* label);
LG_API void lg_dataset_free(lg_dataset* ds);

/* ---- Lyapunov spectrum ---- */

typedef struct lg_lyap_params {
  int emb_dim;
  int matrix_dim;
  int min_nb;
  int min_tsep;
  double tau;
} lg_lyap_params;

LG_API lg_lyap_params lg_lyap_params_default(void);

/* exponents must hold params->matrix_dim values; n_steps may be NULL. */
LG_API lg_status lg_lyap_spectrum(const double* series, size_t length, const lg_lyap_params* params,
                                  double* exponents, int* n_steps);

/* ---- noise ---- */

/* model_json: {"kind": ..., "params": {...}}. out holds `count` values. */
LG_API lg_status lg_apply_noise(const double* pixels, size_t height, size_t width,
                                const char* model_json, uint64_t seed, double* out);

/* ---- isolation forest ---- */

typedef struct lg_iforest lg_iforest;

/* rows is n x dim, row-major. subsample_size 0 selects min(256, n). */
LG_API lg_status lg_iforest_fit(const double* rows, size_t n, size_t dim, size_t n_trees,
                                size_t subsample_size, uint64_t seed, lg_iforest** out);
LG_API lg_status lg_iforest_calibrate(lg_iforest* model, const double* rows, size_t n,
                                      double contamination, double* threshold);
LG_API lg_status lg_iforest_score(const lg_iforest* model, const double* point, size_t dim,
                                  double* score);
/* *reject is 1 when the score exceeds the threshold. */
LG_API lg_status lg_iforest_decide(const lg_iforest* model, const double* point, size_t dim,
                                   int* reject);
LG_API lg_status lg_iforest_save(const lg_iforest* model, const char* path);
LG_API lg_status lg_iforest_load(const char* path, lg_iforest** out);
LG_API void lg_iforest_free(lg_iforest* model);

/* ---- metrics ---- */

/* labels are 0/1, 1 = positive. */
LG_API lg_status lg_auroc(const double* scores, const int* labels, size_t n, double* auroc);

/* ---- pipeline ---- */

/* options_json: {"config": path, "seed": u64, "jobs": n, "out": dir, "feature_dim": 2|4}.
 * An inline config may be passed as "config_json" (object) with "base_dir" for
 * resolving its relative paths.
 * summary_json (may be NULL) receives the command summary. Returns
 * LG_PARTIAL_FAILURE when the command finished with a nonempty error ledger. */
LG_API lg_status lg_run(const char* command, const char* options_json, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* LYAPGUARD_LYAPGUARD_H_ */
