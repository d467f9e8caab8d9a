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

// Per-token importance measures. Every measure explains the gold label.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roarbench/data.hpp"
#include "roarbench/models.hpp"

namespace roarbench::importance {

enum class Measure {
  kAttention,
  kGradient,
  kInputTimesGradient,
  kIntegratedGradient,
  kRandom,
  // Scores every evidence position 1.
  kOracle,
  // Scores only the first evidence position not yet masked.
  kOracleFirst,
};

std::string_view MeasureName(Measure measure);
// Throws ConfigError on unknown names.
Measure ParseMeasure(std::string_view name);
bool NeedsModel(Measure measure);

struct ImportanceMap {
  std::size_t obs_id = 0;
  Measure measure = Measure::kRandom;
  int label = 0;
  std::size_t iteration = 0;
  // One score per primary position. Excluded positions keep whatever the
  // measure produced; `maskable` decides eligibility.
  std::vector<double> scores;
  std::vector<bool> maskable;

  friend bool operator==(const ImportanceMap&, const ImportanceMap&) = default;
};

struct ImportanceOptions {
  std::size_t ig_steps = 50;
  // Random measure seeding: (seed, iteration, obs_id).
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
};

// Single-observation measures. All gradient measures differentiate the gold
// logit with respect to the one-hot encoding of the primary sequence.
std::vector<double> AttentionImportance(const models::TrainedModel& model,
                                        const data::Observation& obs);
std::vector<double> GradientImportance(const models::TrainedModel& model,
                                       const data::Observation& obs,
                                       int label);
std::vector<double> InputTimesGradient(const models::TrainedModel& model,
                                       const data::Observation& obs,
                                       int label);
std::vector<double> IntegratedGradient(const models::TrainedModel& model,
                                       const data::Observation& obs, int label,
                                       std::size_t steps);
std::vector<double> RandomImportance(const data::Observation& obs,
                                     std::uint64_t seed, std::size_t iteration,
                                     std::size_t obs_id);
std::vector<double> OracleImportance(const data::Observation& obs);
std::vector<double> OracleFirstImportance(const data::Observation& obs);

// d f(alpha * x)_label / d x as a [T x V] row-major matrix, with the
// auxiliary sequence held fixed.
std::vector<double> InputGradient(const models::TrainedModel& model,
                                  const data::Observation& obs, int label,
                                  double alpha);
// f(alpha * x)_label through the one-hot path.
double ScaledInputLogit(const models::TrainedModel& model,
                        const data::Observation& obs, int label, double alpha);

// Computes maps for a set of observations, batching gradient passes.
// `model` may be null for model-free measures. obs_ids[i] names
// observations[i].
std::vector<ImportanceMap> ComputeImportance(
    const models::TrainedModel* model, Measure measure,
    std::span<const data::Observation> observations,
    std::span<const std::size_t> obs_ids, const ImportanceOptions& options);

// JSONL: {obs_id, measure, iteration, scores, maskable} per line.
std::string MapsToJsonl(std::span<const ImportanceMap> maps);

}  // namespace roarbench::importance

