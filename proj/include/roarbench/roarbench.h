/*
 * Copyright 2026 The roarbench Authors.
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

/* C interface to roarbench. All functions return an rb_status; on failure
 * rb_last_error() describes the error for the calling thread. Handles are
 * opaque and released with the matching *_free function. */

#ifndef ROARBENCH_ROARBENCH_H_
#define ROARBENCH_ROARBENCH_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RB_API __declspec(dllexport)
#else
#define RB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 2..5 double as process exit codes. */
typedef enum rb_status {
  RB_OK = 0,
  RB_ERR_INTERNAL = 1,
  RB_ERR_CONFIG = 2,
  RB_ERR_RUN_FAILURES = 3,
  RB_ERR_EMPTY_INPUT = 4,
  RB_ERR_VALIDATION_FAILED = 5,
  RB_ERR_USAGE = 6,
  RB_ERR_IO = 7,
  RB_ERR_PARSE = 8,
  RB_ERR_NUMERIC = 9,
  RB_ERR_CONTRACT = 10,
  RB_ERR_UNSUPPORTED_MEASURE = 11,
  RB_ERR_UNDEFINED_SCORE = 12
} rb_status;

typedef enum rb_split {
  RB_SPLIT_TRAIN = 0,
  RB_SPLIT_VALIDATION = 1,
  RB_SPLIT_TEST = 2
} rb_split;

typedef struct rb_dataset rb_dataset;
typedef struct rb_pipeline rb_pipeline;

typedef void (*rb_log_fn)(const char* line, void* user_data);

RB_API const char* rb_version(void);
/* Message of the last failed call on this thread; "" when none. */
RB_API const char* rb_last_error(void);
RB_API const char* rb_status_name(rb_status status);

/* Datasets. kind: "keyword", "paired" or "leakage"; params_json may be NULL. */
RB_API rb_status rb_dataset_generate(const char* kind, const char* params_json,
                                     uint64_t seed, rb_dataset** out);
RB_API rb_status rb_dataset_load(const char* directory, rb_dataset** out);
RB_API rb_status rb_dataset_save(const rb_dataset* dataset,
                                 const char* directory);
/* Writes the 64-character SHA-256 hex digest plus NUL (65 bytes). */
RB_API rb_status rb_dataset_hash(const rb_dataset* dataset, char* buffer,
                                 size_t buffer_size);
RB_API rb_status rb_dataset_split_size(const rb_dataset* dataset,
                                       rb_split split, size_t* out);
RB_API rb_status rb_dataset_num_classes(const rb_dataset* dataset, size_t* out);
RB_API void rb_dataset_free(rb_dataset* dataset);

/* Generates the tabular validation dataset into `directory` and writes its
 * hash like rb_dataset_hash. */
RB_API rb_status rb_tabular_generate(const char* params_json, uint64_t seed,
                                     const char* directory, char* hash,
                                     size_t hash_size);

/* Pipelines. */
RB_API rb_status rb_pipeline_from_json(const char* config_json,
                                       rb_pipeline** out);
RB_API rb_status rb_pipeline_from_file(const char* path, rb_pipeline** out);
/* Overrides a top-level field: out, jobs, seeds, mode, metric, measures.
 * value_json is a JSON literal ("4", "[1,2]", "\"both\""). */
RB_API rb_status rb_pipeline_set(rb_pipeline* pipeline, const char* field,
                                 const char* value_json);
/* Effective configuration as JSON; valid until the next call on the handle. */
RB_API rb_status rb_pipeline_config_json(rb_pipeline* pipeline,
                                         const char** out);
/* cache_dir NULL or "" selects <out>/cache. log may be NULL. */
RB_API rb_status rb_pipeline_run(rb_pipeline* pipeline, const char* cache_dir,
                                 rb_log_fn log, void* user_data);
/* Summary of the last successful run; valid until the next call. */
RB_API rb_status rb_pipeline_summary_json(rb_pipeline* pipeline,
                                          const char** out);
RB_API void rb_pipeline_free(rb_pipeline* pipeline);

/* Renders plots and the faithfulness table for a completed run directory. */
RB_API rb_status rb_report(const char* run_dir, const char* out_dir);

/* Runs the tabular validation experiment, writing validation.json and
 * validation.svg into out_dir. Returns RB_ERR_VALIDATION_FAILED when the
 * verdict fails (artefacts are still written). */
RB_API rb_status rb_validate(const uint64_t* seeds, size_t num_seeds,
                             const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* ROARBENCH_ROARBENCH_H_ */
