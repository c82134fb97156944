/* Copyright 2026 The extraudit Authors
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

/* C interface to the extraction auditor.
 *
 * Every fallible call returns an ea_status. On failure the thread's last
 * error message is available from ea_last_error() until the next call on
 * that thread. Strings returned through char** outputs are owned by the
 * caller and released with ea_string_free().
 */

#ifndef EXTRAUDIT_EXTRAUDIT_H_
#define EXTRAUDIT_EXTRAUDIT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(EXTRAUDIT_BUILDING_LIBRARY)
#define EA_API __attribute__((visibility("default")))
#else
#define EA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ea_status {
  EA_OK = 0,
  EA_INVALID_ARGUMENT = 1,
  EA_MALFORMED_INPUT = 2,
  EA_INVARIANT_VIOLATION = 3,
  EA_EMPTY_INPUT = 4,
  EA_IO = 5,
  EA_INSUFFICIENT_COVERAGE = 6,
  EA_AMBIGUOUS_ZERO = 7,
  EA_TOKEN_OUT_OF_RANGE = 8,
  EA_REPLAY_MISS = 9,
  EA_DUPLICATE_CONTEXT = 10,
  EA_BRIDGE_UNREACHABLE = 11,
  EA_BRIDGE_PROTOCOL = 12,
  EA_PROTOCOL_VERSION_MISMATCH = 13,
  EA_NOT_EXTRACTABLE = 14,
  EA_INSTANCE_TOO_LARGE = 15,
  EA_UNDEFINED_PERPLEXITY = 16,
  EA_ID_MISMATCH = 17,
  EA_GRID_MISMATCH = 18,
  EA_P_NOT_ON_GRID = 19,
  EA_INTERNAL = 20
} ea_status;

EA_API const char* ea_version(void);
EA_API const char* ea_status_name(ea_status status);
/* Message for the most recent failure on the calling thread ("" if none). */
EA_API const char* ea_last_error(void);
EA_API void ea_string_free(char* str);

/* ---- Opaque handles ---------------------------------------------------- */

typedef struct ea_dataset ea_dataset;
typedef struct ea_source ea_source;
typedef struct ea_scheme ea_scheme;

EA_API ea_status ea_dataset_load(const char* path, ea_dataset** out);
EA_API ea_status ea_dataset_parse(const char* jsonl, ea_dataset** out);
EA_API size_t ea_dataset_size(const ea_dataset* dataset);
/* Borrowed pointer, valid while the dataset lives. */
EA_API const char* ea_dataset_id(const ea_dataset* dataset, size_t index);
EA_API void ea_dataset_free(ea_dataset* dataset);

/* spec: "ngram:<path>", "replay:<path>" or "bridge:<url>". */
EA_API ea_status ea_source_open(const char* spec, ea_source** out);
EA_API uint32_t ea_source_vocab_size(const ea_source* source);
EA_API void ea_source_free(ea_source* source);

/* text: "greedy", "topk:k=40,T=1.0", "topq:q=0.9,T=1.0" or "temp:T=1.0". */
EA_API ea_status ea_scheme_parse(const char* text, ea_scheme** out);
EA_API ea_status ea_scheme_to_string(const ea_scheme* scheme, char** out);
EA_API void ea_scheme_free(ea_scheme* scheme);

/* ---- Closed-form relations -------------------------------------------- */

/* Smallest n with 1-(1-p_z)^n >= p. *extractable is 0 (and *n untouched)
 * when no finite n exists. */
EA_API ea_status ea_n_for_p(double p_z, double p, uint64_t* n,
                            int* extractable);
EA_API ea_status ea_p_for_n(double p_z, uint64_t n, double* p);
EA_API ea_status ea_expected_queries(double p_z, uint64_t* n);
EA_API ea_status ea_is_np_extractable(double p_z, uint64_t n, double p,
                                      int* extractable);
/* C(suffix_len, epsilon) * vocab_size^epsilon as a decimal string. */
EA_API ea_status ea_hamming_ball_size(uint64_t suffix_len, uint64_t vocab_size,
                                      uint64_t epsilon, char** out);

/* ---- Per-example scoring ---------------------------------------------- */

typedef struct ea_suffix_result {
  double p_z;
  double log_p_z;        /* -INFINITY when blocked */
  int64_t blocked_index; /* -1 when not blocked */
} ea_suffix_result;

EA_API ea_status ea_suffix_logprob(const ea_source* source,
                                   const ea_dataset* dataset, size_t index,
                                   const ea_scheme* scheme,
                                   ea_suffix_result* out);

/* ---- Batch commands --------------------------------------------------- */

typedef struct ea_run_config {
  const char* dataset_path;
  const char* source_spec;
  const char* scheme;        /* NULL = "greedy" */
  const double* p_values;    /* NULL = 0.1, 0.5, 0.9, 0.999 */
  size_t num_p_values;
  const char* n_grid;        /* NULL = "log:1:1000000:30" */
  uint64_t seed;
  uint64_t trials;
  uint64_t epsilon;
  const char* out_path;      /* NULL = output returned only */
  uint32_t jobs;
  const char* record_path;   /* audit only */
  const char* splits;        /* sweep only */
  double verify_p;           /* verify only */
} ea_run_config;

/* Fills defaults: trials 1000, jobs 1, verify_p 0.5, everything else zero. */
EA_API void ea_run_config_init(ea_run_config* config);

typedef struct ea_run_result {
  char* output;   /* JSONL or CSV body */
  char* summary;  /* human-readable report */
  uint64_t records;
  uint64_t errors;
  int passed;     /* verify only */
} ea_run_result;

EA_API void ea_run_result_free(ea_run_result* result);

EA_API ea_status ea_train_lm(const char* corpus_path, uint32_t order,
                             double alpha, uint32_t vocab_size,
                             const char* out_path);
EA_API ea_status ea_run_audit(const ea_run_config* config,
                              ea_run_result* result);
EA_API ea_status ea_run_curve(const char* results_path,
                              const double* p_values, size_t num_p_values,
                              const char* n_grid, const char* out_csv,
                              const char* dataset_path,
                              ea_run_result* result);
EA_API ea_status ea_run_estimate(const ea_run_config* config,
                                 ea_run_result* result);
EA_API ea_status ea_run_verify(const ea_run_config* config,
                               ea_run_result* result);
EA_API ea_status ea_run_sweep(const ea_run_config* config,
                              ea_run_result* result);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* EXTRAUDIT_EXTRAUDIT_H_ */
