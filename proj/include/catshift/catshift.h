//
// Copyright 2026 The CatShift Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef CATSHIFT_CATSHIFT_H_
#define CATSHIFT_CATSHIFT_H_

/* Stable C interface to the auditing library. Every fallible call returns a
 * cs_status; on failure cs_last_error() holds a message for the calling
 * thread. Strings returned through char** are owned by the caller and must be
 * released with cs_string_free(). Handles are opaque and not thread-safe,
 * except that one cs_model may serve one audit at a time. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CS_API __declspec(dllexport)
#else
#define CS_API __attribute__((visibility("default")))
#endif

typedef enum cs_status {
  CS_OK = 0,
  CS_ERR_INVALID_ARGUMENT = 1,
  CS_ERR_IO = 2,
  CS_ERR_PARSE = 3,
  CS_ERR_INSUFFICIENT_DATA = 4,
  CS_ERR_TRANSPORT = 5,
  CS_ERR_PROTOCOL = 6,
  CS_ERR_JOB_FAILED = 7,
  CS_ERR_NOT_FOUND = 8,
  CS_ERR_INTERNAL = 9
} cs_status;

typedef enum cs_decision { CS_NON_MEMBER = 0, CS_MEMBER = 1 } cs_decision;

typedef struct cs_settings cs_settings;
typedef struct cs_pairs cs_pairs;
typedef struct cs_model cs_model;
typedef struct cs_report cs_report;

CS_API const char* cs_version(void);
CS_API const char* cs_last_error(void);
CS_API void cs_string_free(char* s);

/* Run settings: the flat key schema of the config file format. */
CS_API cs_status cs_settings_new(cs_settings** out);
CS_API void cs_settings_free(cs_settings* settings);
/* Merges a `key = value` file; later loads and overrides win. */
CS_API cs_status cs_settings_load(cs_settings* settings, const char* path);
/* Applies one "key=value" assignment. */
CS_API cs_status cs_settings_set(cs_settings* settings, const char* assignment);
/* Validated snapshot with every key present, as a JSON object. */
CS_API cs_status cs_settings_to_json(const cs_settings* settings, char** json_out);
/* Only the keys that were loaded or set, as a typed JSON object. */
CS_API cs_status cs_settings_explicit_json(const cs_settings* settings,
                                           char** json_out);
CS_API cs_status cs_settings_describe(char** text_out);

/* Loads a corpus and cuts it into prompt/completion pairs using the
 * format and pairing keys of `settings`. */
CS_API cs_status cs_pairs_load(const cs_settings* settings, const char* path,
                               cs_pairs** out);
CS_API void cs_pairs_free(cs_pairs* pairs);
CS_API size_t cs_pairs_size(const cs_pairs* pairs);
CS_API size_t cs_pairs_dropped(const cs_pairs* pairs);
CS_API cs_status cs_pairs_write_jsonl(const cs_pairs* pairs, const char* path);

/* Connects to the endpoint named by `settings` ("sim:<config>" or an
 * http(s) URL). The API token is read from the environment variable named by
 * the token_env key. */
CS_API cs_status cs_model_open(const cs_settings* settings, cs_model** out);
CS_API void cs_model_free(cs_model* model);
CS_API cs_status cs_model_complete(cs_model* model, const char* prompt,
                                   size_t max_new_tokens, char** text_out);

/* Full dual test: the baseline shortcut, else the fine-tune shift test. */
CS_API cs_status cs_audit_run(cs_model* model, const cs_pairs* suspicious,
                              const cs_pairs* validation,
                              const cs_settings* settings, cs_report** out);
/* Baseline only, on the same test splits an audit would use. Writes a JSON
 * object with the baseline statistics. */
CS_API cs_status cs_baseline_run(cs_model* model, const cs_pairs* suspicious,
                                 const cs_pairs* validation,
                                 const cs_settings* settings, char** json_out);

CS_API void cs_report_free(cs_report* report);
CS_API cs_decision cs_report_decision(const cs_report* report);
CS_API double cs_report_p_value(const cs_report* report);
/* Records "member" or "non_member" for later evaluation. */
CS_API cs_status cs_report_set_ground_truth(cs_report* report, const char* label);
CS_API cs_status cs_report_to_json(const cs_report* report, char** json_out);
CS_API cs_status cs_report_text(const cs_report* report, char** text_out);
/* Writes report.json and the two score CSVs; returns the paths as a JSON
 * array. */
CS_API cs_status cs_report_write(const cs_report* report, const char* dir,
                                 char** paths_json_out);

/* Scores every report.json under `dir`. `labels_csv` may be NULL. Writes the
 * summary to `out_json` (plus a sibling .csv) and returns it. */
CS_API cs_status cs_evaluate_dir(const char* dir, double threshold,
                                 const char* labels_csv, const char* out_json,
                                 char** summary_json_out);

/* Runs a simulation scenario given as JSON text; `out_dir` may be NULL or
 * empty to skip writing reports. */
CS_API cs_status cs_simulate(const char* scenario_json, const char* out_dir,
                             char** summary_json_out);

/* mode: "auto", "exact" or "asymptotic"; alternative: "two-sided" or
 * "first-smaller". */
CS_API cs_status cs_ks_two_sample(const double* first, size_t n_first,
                                  const double* second, size_t n_second,
                                  const char* mode, const char* alternative,
                                  double* d_out, double* p_out);
CS_API cs_status cs_mwu_two_sample(const double* first, size_t n_first,
                                   const double* second, size_t n_second,
                                   const char* mode, double* u_out,
                                   double* p_out);
CS_API cs_status cs_similarity(const char* a, const char* b, const char* metric,
                               size_t ngram_n, double* value_out);

CS_API cs_status cs_sha256_file(const char* path, char** hex_out);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* CATSHIFT_CATSHIFT_H_ */
