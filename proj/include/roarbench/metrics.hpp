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

// Classification metrics, the area-between-curves faithfulness score,
// importance sparsity curves and Student-t confidence intervals.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace roarbench::metrics {

enum class MetricKind { kAccuracy, kMacroF1, kMicroF1 };

std::string_view MetricName(MetricKind kind);
// Throws ConfigError for unknown names.
MetricKind ParseMetric(std::string_view name);

// Classes absent from both predictions and golds contribute F1 = 0 to the
// macro average.
double ClassificationMetric(std::span<const int> predictions,
                            std::span<const int> golds,
                            std::size_t num_classes, MetricKind kind);

// Normalised area between the baseline curve `baseline` and the measure curve
// `performance` over the grid `ratios`:
//
//   sum_i dx_i (dp_i + dp_{i+1}) / 2  /  sum_i dx_i (db_i + db_{i+1}) / 2
//
// with dp_i = b_i - p_i and db_i = b_i - b_last. Throws UndefinedScore when
// the denominator is zero and ContractViolation on malformed grids.
double AreaFaithfulness(std::span<const double> ratios,
                        std::span<const double> performance,
                        std::span<const double> baseline);

// Linear interpolation of (ratios, values) onto `grid`.
std::vector<double> Interpolate(std::span<const double> ratios,
                                std::span<const double> values,
                                std::span<const double> grid);

struct StepInvarianceReport {
  double coarse_score = 0.0;
  double refined_score = 0.0;
  double difference = 0.0;
  // True when the refined values are the linear interpolation of the coarse
  // curve (within 1e-12); only then is equality expected.
  bool refined_is_interpolated = false;
  bool equal_within_tolerance = false;
};

StepInvarianceReport StepInvarianceCheck(
    std::span<const double> coarse_ratios,
    std::span<const double> coarse_performance,
    std::span<const double> coarse_baseline,
    std::span<const double> refined_ratios,
    std::span<const double> refined_performance,
    std::span<const double> refined_baseline);

struct ConfidenceInterval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
  std::size_t n = 0;
};

// mean +- t_{(1+level)/2, n-1} * s / sqrt(n). Throws UndefinedScore for n < 2.
ConfidenceInterval StudentTInterval(std::span<const double> values,
                                    double level = 0.95);

struct FaithfulnessScore {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  // False for a single seed; the bounds then equal the mean.
  bool has_interval = false;
  std::vector<double> per_seed;
};

FaithfulnessScore AggregateScores(std::vector<double> per_seed);

struct SparsityCurves {
  // Mean cumulative share of |score| mass captured by the top-k positions,
  // k = 1..absolute_share.size().
  std::vector<double> absolute_share;
  // Mean share captured by the top round(x * M) positions for each x in
  // relative_grid.
  std::vector<double> relative_grid;
  std::vector<double> relative_share;
  std::size_t observations = 0;
  // Maps whose |scores| were all zero; they use the uniform share k / M.
  std::size_t all_zero = 0;
};

// `maps` holds per-observation scores restricted to maskable positions.
SparsityCurves ComputeSparsity(std::span<const std::vector<double>> maps,
                               std::size_t max_k = 10,
                               std::size_t relative_steps = 10);

}  // namespace roarbench::metrics
