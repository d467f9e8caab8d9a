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

/* Exercises the shared library through its C header only. */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "roarbench/roarbench.h"

static int failures = 0;

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: check failed: %s (last error: %s)\n", \
              __FILE__, __LINE__, #cond, rb_last_error());           \
      ++failures;                                                    \
    }                                                                \
  } while (0)

static void count_lines(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

static void test_dataset(const char* scratch) {
  rb_dataset* ds = NULL;
  rb_dataset* loaded = NULL;
  char hash[65], hash_back[65], dir[512];
  size_t n = 0, classes = 0;

  CHECK(rb_dataset_generate(
            "keyword", "{\"sizes\":{\"train\":40,\"validation\":10,\"test\":20}}",
            3, &ds) == RB_OK);
  CHECK(rb_dataset_split_size(ds, RB_SPLIT_TEST, &n) == RB_OK && n == 20);
  CHECK(rb_dataset_num_classes(ds, &classes) == RB_OK && classes == 2);
  CHECK(rb_dataset_hash(ds, hash, sizeof hash) == RB_OK && strlen(hash) == 64);
  CHECK(rb_dataset_hash(ds, hash, 10) == RB_ERR_USAGE);

  snprintf(dir, sizeof dir, "%s/dataset", scratch);
  CHECK(rb_dataset_save(ds, dir) == RB_OK);
  CHECK(rb_dataset_load(dir, &loaded) == RB_OK);
  CHECK(rb_dataset_hash(loaded, hash_back, sizeof hash_back) == RB_OK);
  CHECK(strcmp(hash, hash_back) == 0);
  rb_dataset_free(ds);
  rb_dataset_free(loaded);
  rb_dataset_free(NULL);

  ds = NULL;
  CHECK(rb_dataset_generate("keyword", "{\"entities\":3}", 1, &ds) == RB_ERR_CONFIG);
  CHECK(ds == NULL);
  CHECK(strlen(rb_last_error()) > 0);
  CHECK(rb_dataset_generate("keyword", "{not json", 1, &ds) == RB_ERR_CONFIG);
  CHECK(rb_dataset_generate(NULL, NULL, 1, &ds) == RB_ERR_USAGE);
}

static void test_pipeline(const char* scratch) {
  rb_pipeline* p = NULL;
  const char* text = NULL;
  char out[512], value[600];
  int lines = 0;
  const char* config =
      "{\"dataset\":{\"name\":\"kw\",\"generator\":\"keyword\",\"seed\":1,"
      "\"params\":{\"sizes\":{\"train\":100,\"validation\":30,\"test\":50}}},"
      "\"model\":{\"architecture\":\"linear\",\"max_epochs\":2},"
      "\"measures\":[\"random\"],\"schedule\":{\"relative_step\":0.5},"
      "\"seeds\":[1,2]}";

  CHECK(rb_pipeline_from_json("{\"measures\":[]}", &p) == RB_ERR_CONFIG);
  CHECK(rb_pipeline_from_json(config, &p) == RB_OK);
  snprintf(out, sizeof out, "%s/run", scratch);
  snprintf(value, sizeof value, "\"%s\"", out);
  CHECK(rb_pipeline_set(p, "out", value) == RB_OK);
  CHECK(rb_pipeline_set(p, "jobs", "2") == RB_OK);
  CHECK(rb_pipeline_set(p, "hidden_size", "4") == RB_ERR_USAGE);
  CHECK(rb_pipeline_set(p, "jobs", "two") == RB_ERR_USAGE);
  CHECK(rb_pipeline_config_json(p, &text) == RB_OK && strstr(text, "\"jobs\": 2"));
  CHECK(rb_pipeline_summary_json(p, &text) == RB_ERR_USAGE);
  CHECK(rb_pipeline_run(p, NULL, count_lines, &lines) == RB_OK);
  CHECK(lines > 0);
  CHECK(rb_pipeline_summary_json(p, &text) == RB_OK && strstr(text, "faithfulness"));
  rb_pipeline_free(p);

  CHECK(rb_report(out, out) == RB_OK);
  snprintf(value, sizeof value, "%s/nothing", scratch);
  CHECK(rb_report(value, value) == RB_ERR_EMPTY_INPUT);
  CHECK(rb_pipeline_from_file("/nonexistent/config.json", &p) != RB_OK);
}

int main(int argc, char** argv) {
  const char* scratch = argc > 1 ? argv[1] : "capi_scratch";
  CHECK(strlen(rb_version()) > 0);
  CHECK(strcmp(rb_status_name(RB_ERR_EMPTY_INPUT), "") != 0);
  test_dataset(scratch);
  test_pipeline(scratch);
  if (failures == 0) printf("capi: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
