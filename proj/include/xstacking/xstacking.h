/*
 * Copyright 2026 The XStacking Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the XStacking library.
 *
 * Every call returns an xstk_status. On failure, xstk_last_error() returns
 * a message describing the most recent error on the calling thread; it stays
 * valid until the next failing call on that thread. Strings returned through
 * out-parameters are owned by the caller and released with xstk_string_free.
 */

#ifndef XSTACKING_XSTACKING_H_
#define XSTACKING_XSTACKING_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define XSTK_API __declspec(dllexport)
#else
#define XSTK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  XSTK_OK = 0,
  XSTK_USAGE = 1,    /* bad arguments or configuration */
  XSTK_DATA = 2,     /* unreadable or invalid input data */
  XSTK_TRAINING = 3, /* fitting or explanation failed */
  XSTK_PARTIAL = 4,  /* benchmark finished with failed datasets */
  XSTK_INTERNAL = 5
} xstk_status;

typedef struct xstk_dataset xstk_dataset;
typedef struct xstk_ensemble xstk_ensemble;

XSTK_API const char* xstk_last_error(void);
XSTK_API const char* xstk_version(void);
XSTK_API void xstk_string_free(char* s);

/* Worker threads for explanation and fitting; n <= 0 selects the hardware
 * concurrency. Results do not depend on this setting. */
XSTK_API xstk_status xstk_set_threads(int n);

/* Loads a CSV with a header row. task is "classification" or "regression";
 * target is a column name, or a zero-based index when target_is_index != 0. */
XSTK_API xstk_status xstk_dataset_load_csv(const char* path, const char* target,
                                           int target_is_index,
                                           const char* task,
                                           xstk_dataset** out);
XSTK_API void xstk_dataset_free(xstk_dataset* ds);
XSTK_API size_t xstk_dataset_rows(const xstk_dataset* ds);
XSTK_API size_t xstk_dataset_cols(const xstk_dataset* ds);

/* Trains an ensemble. config_json holds the ensemble configuration (keys
 * base, meta, mode, folds, seed, shap_estimator, shap_samples,
 * background_size, naive, ...); NULL or "" selects the defaults. */
XSTK_API xstk_status xstk_train(const xstk_dataset* ds, const char* config_json,
                                xstk_ensemble** out);
XSTK_API void xstk_ensemble_free(xstk_ensemble* e);
XSTK_API xstk_status xstk_ensemble_save(const xstk_ensemble* e, const char* dir);
XSTK_API xstk_status xstk_ensemble_load(const char* dir, xstk_ensemble** out);
XSTK_API size_t xstk_ensemble_meta_width(const xstk_ensemble* e);

/* Training summary as JSON (timings included when include_timings != 0). */
XSTK_API xstk_status xstk_ensemble_summary_json(const xstk_ensemble* e,
                                                int include_timings,
                                                char** out_json);

/* Predicts the rows of a CSV file. Feature columns are matched by name; the
 * target column, if present, is ignored. Writes a CSV with one prediction
 * per row (plus class probabilities for classification) to out_path. */
XSTK_API xstk_status xstk_predict_csv(const xstk_ensemble* e, const char* in_path,
                                      const char* out_path);

/* Predictions for a row-major n x d buffer of raw feature values in the
 * ensemble's column order. Classification writes class indices. */
XSTK_API xstk_status xstk_predict(const xstk_ensemble* e, const double* x,
                                  size_t n, size_t d, double* out);

/* Explains every row of a CSV file. Writes into out_dir:
 *   stage1.csv   K*d base-learner attributions per row (provenance headers)
 *   stage2.csv   meta-learner attribution over the meta-features per row,
 *                with base_value and fx columns
 *   explanation.json  provenance and estimator metadata
 * out_max_gap receives the largest stage-2 efficiency gap (may be NULL). */
XSTK_API xstk_status xstk_explain_csv(const xstk_ensemble* e, const char* in_path,
                                      const char* out_dir, double* out_max_gap);

/* Runs a benchmark config file. Writes report.json and summary.csv into
 * out_dir. out_summary (may be NULL) receives the printable summary table.
 * Returns XSTK_PARTIAL when some datasets failed. */
XSTK_API xstk_status xstk_benchmark(const char* config_path, const char* out_dir,
                                    char** out_summary);

/* Writes the synthetic suite (variants 0..5) as CSV files into out_dir. */
XSTK_API xstk_status xstk_generate_synthetic(const char* out_dir, size_t rows,
                                             uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* XSTACKING_XSTACKING_H_ */
