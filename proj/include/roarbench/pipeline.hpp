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

// End-to-end pipelines behind the command-line front end: configuration,
// curve and faithfulness exports, reports, and the validation experiment.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "roarbench/data.hpp"
#include "roarbench/harness.hpp"
#include "roarbench/metrics.hpp"

namespace roarbench::pipeline {

using Json = nlohmann::ordered_json;
using LogFn = std::function<void(const std::string&)>;

// Generator kinds: keyword, paired, leakage (token datasets) and tabular.
// `params` accepts "n" (training size; validation and test get n/4) or
// "sizes" {train, validation, test}, plus generator-specific fields.
// Unknown or conflicting fields throw ConfigError.
bool IsTokenGenerator(std::string_view kind);
data::TokenDataset GenerateTokens(std::string_view kind, const Json& params,
                                  std::uint64_t seed);
data::TabularDataset GenerateTabularData(const Json& params,
                                         std::uint64_t seed);

struct DatasetSpec {
  std::string name;
  // Either a generator (with params and seed) or a saved dataset path.
  std::string generator;
  Json params = Json::object();
  std::uint64_t seed = 0;
  std::string path;
};

struct PipelineConfig {
  DatasetSpec dataset;
  models::Architecture architecture =
      models::Architecture::kBiLstmAttentionSingle;
  std::size_t embedding_size = 16;
  std::size_t hidden_size = 16;
  std::size_t max_epochs = 20;
  std::size_t batch_size = 32;
  grad::OptimizerConfig optimizer;
  std::vector<importance::Measure> measures;
  std::vector<harness::RoarMode> modes = {harness::RoarMode::kRecursive};
  masking::StepSchedule schedule;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  metrics::MetricKind metric = metrics::MetricKind::kAccuracy;
  bool absolute_scores = false;
  std::size_t ig_steps = 50;
  std::string out = "roarbench_out";
  std::size_t jobs = 1;
  bool dump_importance = true;
};

// Strict parse: unknown fields and wrong types throw ConfigError.
PipelineConfig ParseConfig(const Json& doc);
PipelineConfig LoadConfig(const std::filesystem::path& path);
Json ConfigToJson(const PipelineConfig& config);
// Replaces one top-level field (out, jobs, seeds, mode, metric, measures)
// and revalidates.
void ApplyOverride(PipelineConfig& config, std::string_view field,
                   const Json& value);

struct LoadedDataset {
  std::string name;
  std::shared_ptr<const data::TokenDataset> dataset;
};
LoadedDataset LoadPipelineDataset(const DatasetSpec& spec);
harness::ExperimentPlan MakePlan(const PipelineConfig& config,
                                 const LoadedDataset& dataset,
                                 harness::RoarMode mode);

// Curve document for one plan. Deterministic: no wall-time fields.
Json CurvesJson(const harness::PlanResult& result,
                const PipelineConfig& config, const std::string& label);

struct FaithfulnessRow {
  std::string dataset;
  std::string measure;
  metrics::FaithfulnessScore score;
};
std::vector<FaithfulnessRow> FaithfulnessRows(const Json& curves);
std::string FaithfulnessCsv(const std::vector<FaithfulnessRow>& rows);

struct PipelineOutcome {
  Json summary;
  std::vector<harness::PlanResult> results;
};

// Writes <out>/effective_config.json, <out>/runs/..., <out>/curves/*.json,
// <out>/faithfulness.csv and <out>/summary.json.
PipelineOutcome RunPipeline(const PipelineConfig& config,
                            const std::filesystem::path& cache_dir,
                            const LogFn& log = {});

// Renders one SVG per curve file found under <run_dir>/curves and a
// faithfulness table into `out`. Throws EmptyInput when there are no curves.
Json Report(const std::filesystem::path& run_dir,
            const std::filesystem::path& out);

// Writes validation.json and validation.svg; returns the verdict.
bool Validate(const harness::ValidationOptions& options,
              const std::filesystem::path& out, Json* verdict = nullptr);

}  // namespace roarbench::pipeline
