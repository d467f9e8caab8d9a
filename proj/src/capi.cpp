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

#include "roarbench/roarbench.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "roarbench/errors.hpp"
#include "roarbench/pipeline.hpp"

using namespace roarbench;

struct rb_dataset {
  data::TokenDataset dataset;
};

struct rb_pipeline {
  pipeline::PipelineConfig config;
  std::string config_text;
  std::string summary_text;
};

namespace {

thread_local std::string last_error;

rb_status StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfiguration: return RB_ERR_CONFIG;
    case ErrorCode::kRunFailures: return RB_ERR_RUN_FAILURES;
    case ErrorCode::kEmptyInput: return RB_ERR_EMPTY_INPUT;
    case ErrorCode::kValidationFailed: return RB_ERR_VALIDATION_FAILED;
    case ErrorCode::kUsage: return RB_ERR_USAGE;
    case ErrorCode::kIo: return RB_ERR_IO;
    case ErrorCode::kParse: return RB_ERR_PARSE;
    case ErrorCode::kNumericFailure: return RB_ERR_NUMERIC;
    case ErrorCode::kContractViolation: return RB_ERR_CONTRACT;
    case ErrorCode::kUnsupportedMeasure: return RB_ERR_UNSUPPORTED_MEASURE;
    case ErrorCode::kUndefinedScore: return RB_ERR_UNDEFINED_SCORE;
  }
  return RB_ERR_INTERNAL;
}

rb_status Fail(rb_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename Fn>
rb_status Guard(Fn&& fn) {
  last_error.clear();
  try {
    return fn();
  } catch (const Error& e) {
    return Fail(StatusFor(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return Fail(RB_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(RB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(RB_ERR_INTERNAL, e.what());
  } catch (...) {
    return Fail(RB_ERR_INTERNAL, "unknown error");
  }
}

pipeline::Json ParseParams(const char* params_json) {
  if (params_json == nullptr || *params_json == '\0') return pipeline::Json::object();
  try {
    return pipeline::Json::parse(params_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("params are not valid JSON: ") + e.what());
  }
}

rb_status CopyHash(const std::string& hash, char* buffer, size_t size) {
  if (buffer == nullptr || size < hash.size() + 1) {
    return Fail(RB_ERR_USAGE, "hash buffer needs 65 bytes");
  }
  std::memcpy(buffer, hash.c_str(), hash.size() + 1);
  return RB_OK;
}

#define RB_REQUIRE_ARG(cond)                                           \
  do {                                                                 \
    if (!(cond)) return Fail(RB_ERR_USAGE, "invalid argument: " #cond); \
  } while (0)

}  // namespace

extern "C" {

const char* rb_version(void) { return "0.1.0"; }

const char* rb_last_error(void) { return last_error.c_str(); }

const char* rb_status_name(rb_status status) {
  switch (status) {
    case RB_OK: return "ok";
    case RB_ERR_INTERNAL: return "internal error";
    case RB_ERR_CONFIG: return "configuration error";
    case RB_ERR_RUN_FAILURES: return "run failures";
    case RB_ERR_EMPTY_INPUT: return "empty input";
    case RB_ERR_VALIDATION_FAILED: return "validation failed";
    case RB_ERR_USAGE: return "usage error";
    case RB_ERR_IO: return "i/o error";
    case RB_ERR_PARSE: return "parse error";
    case RB_ERR_NUMERIC: return "numeric failure";
    case RB_ERR_CONTRACT: return "contract violation";
    case RB_ERR_UNSUPPORTED_MEASURE: return "unsupported measure";
    case RB_ERR_UNDEFINED_SCORE: return "undefined score";
  }
  return "unknown status";
}

rb_status rb_dataset_generate(const char* kind, const char* params_json,
                              uint64_t seed, rb_dataset** out) {
  RB_REQUIRE_ARG(kind != nullptr && out != nullptr);
  *out = nullptr;
  return Guard([&] {
    auto handle = std::make_unique<rb_dataset>();
    handle->dataset = pipeline::GenerateTokens(kind, ParseParams(params_json), seed);
    *out = handle.release();
    return RB_OK;
  });
}

rb_status rb_dataset_load(const char* directory, rb_dataset** out) {
  RB_REQUIRE_ARG(directory != nullptr && out != nullptr);
  *out = nullptr;
  return Guard([&] {
    auto handle = std::make_unique<rb_dataset>();
    handle->dataset = data::LoadDataset(directory);
    *out = handle.release();
    return RB_OK;
  });
}

rb_status rb_dataset_save(const rb_dataset* dataset, const char* directory) {
  RB_REQUIRE_ARG(dataset != nullptr && directory != nullptr);
  return Guard([&] {
    data::SaveDataset(dataset->dataset, directory);
    return RB_OK;
  });
}

rb_status rb_dataset_hash(const rb_dataset* dataset, char* buffer,
                          size_t buffer_size) {
  RB_REQUIRE_ARG(dataset != nullptr);
  return Guard([&] {
    return CopyHash(data::DatasetHash(dataset->dataset), buffer, buffer_size);
  });
}

rb_status rb_dataset_split_size(const rb_dataset* dataset, rb_split split,
                                size_t* out) {
  RB_REQUIRE_ARG(dataset != nullptr && out != nullptr);
  RB_REQUIRE_ARG(split >= RB_SPLIT_TRAIN && split <= RB_SPLIT_TEST);
  *out = dataset->dataset.split(static_cast<data::SplitKind>(split)).size();
  return RB_OK;
}

rb_status rb_dataset_num_classes(const rb_dataset* dataset, size_t* out) {
  RB_REQUIRE_ARG(dataset != nullptr && out != nullptr);
  *out = dataset->dataset.num_classes;
  return RB_OK;
}

void rb_dataset_free(rb_dataset* dataset) { delete dataset; }

rb_status rb_tabular_generate(const char* params_json, uint64_t seed,
                              const char* directory, char* hash,
                              size_t hash_size) {
  RB_REQUIRE_ARG(directory != nullptr);
  return Guard([&] {
    const data::TabularDataset ds =
        pipeline::GenerateTabularData(ParseParams(params_json), seed);
    data::SaveTabular(ds, directory);
    return CopyHash(data::TabularHash(ds), hash, hash_size);
  });
}

rb_status rb_pipeline_from_json(const char* config_json, rb_pipeline** out) {
  RB_REQUIRE_ARG(config_json != nullptr && out != nullptr);
  *out = nullptr;
  return Guard([&] {
    pipeline::Json doc;
    try {
      doc = pipeline::Json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    auto handle = std::make_unique<rb_pipeline>();
    handle->config = pipeline::ParseConfig(doc);
    *out = handle.release();
    return RB_OK;
  });
}

rb_status rb_pipeline_from_file(const char* path, rb_pipeline** out) {
  RB_REQUIRE_ARG(path != nullptr && out != nullptr);
  *out = nullptr;
  return Guard([&] {
    auto handle = std::make_unique<rb_pipeline>();
    handle->config = pipeline::LoadConfig(path);
    *out = handle.release();
    return RB_OK;
  });
}

rb_status rb_pipeline_set(rb_pipeline* p, const char* field,
                          const char* value_json) {
  RB_REQUIRE_ARG(p != nullptr && field != nullptr && value_json != nullptr);
  return Guard([&] {
    pipeline::Json value;
    try {
      value = pipeline::Json::parse(value_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError(std::string("override value is not valid JSON: ") + e.what());
    }
    pipeline::ApplyOverride(p->config, field, value);
    return RB_OK;
  });
}

rb_status rb_pipeline_config_json(rb_pipeline* p, const char** out) {
  RB_REQUIRE_ARG(p != nullptr && out != nullptr);
  return Guard([&] {
    p->config_text = pipeline::ConfigToJson(p->config).dump(2);
    *out = p->config_text.c_str();
    return RB_OK;
  });
}

rb_status rb_pipeline_run(rb_pipeline* p, const char* cache_dir, rb_log_fn log,
                          void* user_data) {
  RB_REQUIRE_ARG(p != nullptr);
  return Guard([&] {
    std::filesystem::path cache = (cache_dir != nullptr && *cache_dir != '\0')
                                      ? std::filesystem::path(cache_dir)
                                      : std::filesystem::path(p->config.out) / "cache";
    pipeline::LogFn fn;
    if (log != nullptr) {
      fn = [log, user_data](const std::string& line) { log(line.c_str(), user_data); };
    }
    const pipeline::PipelineOutcome outcome = pipeline::RunPipeline(p->config, cache, fn);
    p->summary_text = outcome.summary.dump(2);
    return RB_OK;
  });
}

rb_status rb_pipeline_summary_json(rb_pipeline* p, const char** out) {
  RB_REQUIRE_ARG(p != nullptr && out != nullptr);
  if (p->summary_text.empty()) return Fail(RB_ERR_USAGE, "pipeline has not run");
  *out = p->summary_text.c_str();
  return RB_OK;
}

void rb_pipeline_free(rb_pipeline* pipeline) { delete pipeline; }

rb_status rb_report(const char* run_dir, const char* out_dir) {
  RB_REQUIRE_ARG(run_dir != nullptr && out_dir != nullptr);
  return Guard([&] {
    pipeline::Report(run_dir, out_dir);
    return RB_OK;
  });
}

rb_status rb_validate(const uint64_t* seeds, size_t num_seeds,
                      const char* out_dir) {
  RB_REQUIRE_ARG(out_dir != nullptr);
  RB_REQUIRE_ARG(seeds != nullptr || num_seeds == 0);
  return Guard([&] {
    harness::ValidationOptions options;
    if (num_seeds > 0) options.seeds.assign(seeds, seeds + num_seeds);
    pipeline::Json verdict;
    if (!pipeline::Validate(options, out_dir, &verdict)) {
      return Fail(RB_ERR_VALIDATION_FAILED,
                  "recursive ROAR deviates from the ground truth by " +
                      verdict.at("max_recursive_deviation").dump());
    }
    return RB_OK;
  });
}

}  // extern "C"
