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

// ROAR and Recursive ROAR orchestration, the run cache, and the tabular
// validation experiment.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "roarbench/data.hpp"
#include "roarbench/importance.hpp"
#include "roarbench/masking.hpp"
#include "roarbench/metrics.hpp"
#include "roarbench/models.hpp"

namespace roarbench::harness {

enum class RoarMode { kClassic, kRecursive };

// "roar" and "recursive-roar".
std::string_view ModeName(RoarMode mode);
RoarMode ParseMode(std::string_view name);

struct ExperimentPlan {
  std::string dataset_name = "dataset";
  std::shared_ptr<const data::TokenDataset> dataset;
  models::ModelConfig model;
  // The random baseline is appended when missing.
  std::vector<importance::Measure> measures;
  masking::StepSchedule schedule;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  RoarMode mode = RoarMode::kRecursive;
  metrics::MetricKind metric = metrics::MetricKind::kAccuracy;
  // Rank by |score| instead of the signed score.
  bool absolute_scores = false;
  std::size_t ig_steps = 50;
};

// Throws ConfigError (or UnsupportedMeasure) for an unusable plan.
void ValidatePlan(const ExperimentPlan& plan);
std::vector<importance::Measure> PlanMeasures(const ExperimentPlan& plan);
std::string PlanHash(const ExperimentPlan& plan);

inline constexpr std::string_view kSharedMeasure = "shared";

struct RunRecord {
  std::string key;
  // Measure name, or "shared" for the 0 % and 100 % runs.
  std::string measure;
  // Mode name, or "shared".
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  double ratio = 0.0;
  bool failed = false;
  std::string error;
  std::size_t attempts = 0;
  std::uint64_t init_seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::size_t best_epoch = 0;
  // Masked share of maskable test tokens.
  double masked_share = 0.0;
  // Sparsity of the test-split maps that produced this iteration's masks:
  // mean share of |score| mass in the top-k (k = 1..10) and top-x % positions.
  std::vector<double> sparsity_top_k;
  std::vector<double> sparsity_relative;
  double wall_time_seconds = 0.0;
  bool from_cache = false;

  double performance(metrics::MetricKind metric) const;
};

nlohmann::ordered_json RecordToJson(const RunRecord& record);
RunRecord RecordFromJson(const nlohmann::ordered_json& doc);

// Content-addressed store of completed runs. Entries live at
// <directory>/<key>/{record.json, checkpoint.json, masks.jsonl}. Unreadable
// entries are moved to <directory>/quarantine and reported as misses.
// Shared (0 % / 100 %) runs are also memoised in memory.
class RunCache {
 public:
  struct Entry {
    RunRecord record;
    grad::ParameterSet parameters;
    std::vector<masking::MaskState> masks;
  };

  // An empty directory keeps the cache in memory only.
  explicit RunCache(std::filesystem::path directory = {});

  std::optional<Entry> Lookup(const std::string& key,
                              std::size_t expected_masks);
  void Store(const Entry& entry, bool keep_in_memory);

  const std::filesystem::path& directory() const { return directory_; }
  std::size_t quarantined() const;

 private:
  std::filesystem::path directory_;
  mutable std::mutex mutex_;
  std::map<std::string, Entry> memory_;
  std::size_t quarantined_ = 0;
};

struct RunOptions {
  // Run-store root; empty disables artefact writing.
  std::filesystem::path store;
  RunCache* cache = nullptr;
  std::size_t jobs = 1;
  bool dump_importance = true;
  std::function<void(const std::string&)> log;
};

struct PlanResult {
  std::string plan_hash;
  std::string dataset_name;
  RoarMode mode = RoarMode::kRecursive;
  std::vector<double> ratios;
  std::vector<std::string> measures;
  std::vector<std::uint64_t> seeds;
  // Every record, shared runs once per seed.
  std::vector<RunRecord> records;
  std::size_t trained_runs = 0;
  std::size_t failed_runs = 0;

  // Performance per iteration for (measure, seed), shared points included.
  // NaN marks a failed run.
  std::vector<double> Curve(const std::string& measure, std::uint64_t seed,
                            metrics::MetricKind metric) const;
};

// Throws RunFailures when more than 20 % of the runs fail.
PlanResult RunRoar(const ExperimentPlan& plan, const RunOptions& options);
PlanResult RunRecursiveRoar(ExperimentPlan plan, const RunOptions& options);
PlanResult RunClassicRoar(ExperimentPlan plan, const RunOptions& options);

inline constexpr double kMaxFailureShare = 0.2;

// Tabular validation experiment.

struct ValidationOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  data::SplitSizes sizes{8000, 2000, 10000};
  double l2_penalty = 1e-5;
  double tolerance = 0.02;
  double classic_margin = 0.05;
};

struct ValidationSeedCurves {
  std::uint64_t seed = 0;
  // Accuracy after k = 0..16 removals.
  std::vector<double> ground_truth;
  std::vector<double> worst_case;
  std::vector<double> classic;
  std::vector<double> recursive;
  std::vector<std::size_t> ground_truth_order;
  std::vector<std::size_t> classic_order;
  std::vector<std::size_t> recursive_order;
  // Largest classic - ground_truth gap over intermediate steps.
  double classic_max_excess = 0.0;
};

struct ValidationResult {
  std::vector<ValidationSeedCurves> seeds;
  std::vector<double> mean_ground_truth;
  std::vector<double> mean_worst_case;
  std::vector<double> mean_classic;
  std::vector<double> mean_recursive;
  double max_recursive_deviation = 0.0;
  std::size_t classic_exceeding_seeds = 0;
  double tolerance = 0.0;
  double classic_margin = 0.0;
  // Recursive ROAR within `tolerance` of the ground truth at every step.
  bool pass = false;
};

// Ground-truth order: informative features by decreasing |a_j|, then the
// irrelevant features by index. Worst case: irrelevant features first, then
// informative features by increasing |a_j|.
std::vector<std::size_t> GroundTruthOrder(const data::TabularDataset& dataset);
std::vector<std::size_t> WorstCaseOrder(const data::TabularDataset& dataset);

// Accuracy on the test split after retraining with the first k features of
// `order` masked, for k = 0..16.
std::vector<double> RemovalCurve(const data::TabularDataset& dataset,
                                 const std::vector<std::size_t>& order,
                                 double l2_penalty);

ValidationResult RunSyntheticValidation(const ValidationOptions& options);
nlohmann::ordered_json ValidationToJson(const ValidationResult& result);

}  // namespace roarbench::harness

