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

#include "roarbench/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <functional>
#include <numeric>

#include "roarbench/errors.hpp"

namespace roarbench::metrics {

std::string_view MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kAccuracy:
      return "accuracy";
    case MetricKind::kMacroF1:
      return "macro-f1";
    case MetricKind::kMicroF1:
      return "micro-f1";
  }
  return "unknown";
}

MetricKind ParseMetric(std::string_view name) {
  if (name == "accuracy") return MetricKind::kAccuracy;
  if (name == "macro-f1") return MetricKind::kMacroF1;
  if (name == "micro-f1") return MetricKind::kMicroF1;
  throw ConfigError("unknown metric kind '" + std::string(name) + "'");
}

double ClassificationMetric(std::span<const int> predictions,
                            std::span<const int> golds,
                            std::size_t num_classes, MetricKind kind) {
  Require(!golds.empty(), "classification metric on empty input");
  Require(predictions.size() == golds.size(),
          "prediction and gold counts differ");
  std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const int p = predictions[i], g = golds[i];
    Require(p >= 0 && static_cast<std::size_t>(p) < num_classes &&
                g >= 0 && static_cast<std::size_t>(g) < num_classes,
            "label outside [0, num_classes)");
    if (p == g) {
      ++correct;
      ++tp[static_cast<std::size_t>(g)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(g)];
    }
  }
  const double accuracy =
      static_cast<double>(correct) / static_cast<double>(golds.size());
  switch (kind) {
    case MetricKind::kAccuracy:
      return accuracy;
    case MetricKind::kMacroF1: {
      double total = 0.0;
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double denom =
            2.0 * static_cast<double>(tp[c]) + static_cast<double>(fp[c] + fn[c]);
        if (denom > 0.0) total += 2.0 * static_cast<double>(tp[c]) / denom;
      }
      return total / static_cast<double>(num_classes);
    }
    case MetricKind::kMicroF1: {
      const double tps = std::accumulate(tp.begin(), tp.end(), 0.0);
      const double fps = std::accumulate(fp.begin(), fp.end(), 0.0);
      const double fns = std::accumulate(fn.begin(), fn.end(), 0.0);
      const double micro = 2.0 * tps / (2.0 * tps + fps + fns);
      // Single-label multiclass: pooled TP is the number of correct answers.
      if (std::abs(micro - accuracy) > 1e-12) {
        throw ContractViolation("micro-F1 diverged from accuracy");
      }
      return micro;
    }
  }
  throw ConfigError("unknown metric kind");
}

namespace {

void CheckGrid(std::span<const double> ratios, std::size_t n,
               std::string_view what) {
  Require(ratios.size() >= 2, std::string(what) + ": need at least 2 points");
  Require(ratios.size() == n, std::string(what) + ": series lengths differ");
  Require(ratios.front() == 0.0 && ratios.back() == 1.0,
          std::string(what) + ": ratios must run from 0 to 1");
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    Require(ratios[i] > ratios[i - 1],
            std::string(what) + ": ratios must be strictly increasing");
  }
}

}  // namespace

double AreaFaithfulness(std::span<const double> ratios,
                        std::span<const double> performance,
                        std::span<const double> baseline) {
  CheckGrid(ratios, performance.size(), "area_faithfulness");
  Require(baseline.size() == ratios.size(),
          "area_faithfulness: series lengths differ");
  // Both terms are differences of trapezoid areas computed the same way, so
  // p == b gives exactly 0 and a flat p at the floor gives exactly 1.
  const std::size_t count = ratios.size();
  const double floor = baseline[count - 1];
  auto area = [&](auto value) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
      total += 0.5 * (ratios[i + 1] - ratios[i]) * (value(i) + value(i + 1));
    }
    return total;
  };
  const double baseline_area = area([&](std::size_t i) { return baseline[i]; });
  const double numerator =
      baseline_area - area([&](std::size_t i) { return performance[i]; });
  const double denominator =
      baseline_area - area([&](std::size_t) { return floor; });
  if (denominator == 0.0) {
    throw UndefinedScore(
        "faithfulness undefined: baseline area above its final point is zero");
  }
  return numerator / denominator;
}

std::vector<double> Interpolate(std::span<const double> ratios,
                                std::span<const double> values,
                                std::span<const double> grid) {
  CheckGrid(ratios, values.size(), "interpolate");
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x : grid) {
    Require(x >= ratios.front() && x <= ratios.back(),
            "interpolate: grid point outside the curve's range");
    auto it = std::upper_bound(ratios.begin(), ratios.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - ratios.begin());
    if (hi == ratios.size()) hi = ratios.size() - 1;
    const std::size_t lo = hi - 1;
    const double t = (x - ratios[lo]) / (ratios[hi] - ratios[lo]);
    out.push_back(values[lo] + t * (values[hi] - values[lo]));
  }
  return out;
}

StepInvarianceReport StepInvarianceCheck(
    std::span<const double> coarse_ratios,
    std::span<const double> coarse_performance,
    std::span<const double> coarse_baseline,
    std::span<const double> refined_ratios,
    std::span<const double> refined_performance,
    std::span<const double> refined_baseline) {
  StepInvarianceReport report;
  report.coarse_score =
      AreaFaithfulness(coarse_ratios, coarse_performance, coarse_baseline);
  report.refined_score =
      AreaFaithfulness(refined_ratios, refined_performance, refined_baseline);
  report.difference = report.refined_score - report.coarse_score;

  const auto p = Interpolate(coarse_ratios, coarse_performance, refined_ratios);
  const auto b = Interpolate(coarse_ratios, coarse_baseline, refined_ratios);
  report.refined_is_interpolated = true;
  for (std::size_t i = 0; i < refined_ratios.size(); ++i) {
    if (std::abs(p[i] - refined_performance[i]) > 1e-12 ||
        std::abs(b[i] - refined_baseline[i]) > 1e-12) {
      report.refined_is_interpolated = false;
    }
  }
  report.equal_within_tolerance = std::abs(report.difference) <= 1e-12;
  return report;
}

ConfidenceInterval StudentTInterval(std::span<const double> values,
                                    double level) {
  if (values.size() < 2) {
    throw UndefinedScore("confidence interval needs at least 2 values");
  }
  Require(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
  if (std::all_of(values.begin(), values.end(),
                  [&](double v) { return v == values.front(); })) {
    const double v = values.front();
    return {v, v, v, values.size()};
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  const double half = t * sd / std::sqrt(n);
  return {mean, mean - half, mean + half, values.size()};
}

FaithfulnessScore AggregateScores(std::vector<double> per_seed) {
  Require(!per_seed.empty(), "no per-seed scores to aggregate");
  FaithfulnessScore score;
  if (per_seed.size() >= 2) {
    const ConfidenceInterval ci = StudentTInterval(per_seed);
    score.mean = ci.mean;
    score.ci_low = ci.low;
    score.ci_high = ci.high;
    score.has_interval = true;
  } else {
    score.mean = score.ci_low = score.ci_high = per_seed.front();
  }
  score.per_seed = std::move(per_seed);
  return score;
}

SparsityCurves ComputeSparsity(std::span<const std::vector<double>> maps,
                               std::size_t max_k,
                               std::size_t relative_steps) {
  Require(!maps.empty(), "sparsity needs at least one importance map");
  Require(relative_steps >= 1, "sparsity needs relative_steps >= 1");
  SparsityCurves curves;
  curves.absolute_share.assign(max_k, 0.0);
  for (std::size_t i = 1; i <= relative_steps; ++i) {
    curves.relative_grid.push_back(static_cast<double>(i) /
                                   static_cast<double>(relative_steps));
  }
  curves.relative_share.assign(relative_steps, 0.0);

  std::vector<double> sorted, cumulative;
  for (const std::vector<double>& map : maps) {
    const std::size_t m = map.size();
    if (m == 0) continue;
    ++curves.observations;
    sorted.resize(m);
    std::transform(map.begin(), map.end(), sorted.begin(),
                   [](double v) { return std::abs(v); });
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    const bool zero = total == 0.0;
    if (zero) ++curves.all_zero;
    cumulative.assign(m + 1, 0.0);
    for (std::size_t k = 1; k <= m; ++k) {
      cumulative[k] = zero ? static_cast<double>(k) / static_cast<double>(m)
                           : cumulative[k - 1] + sorted[k - 1] / total;
    }
    cumulative[m] = 1.0;
    for (std::size_t k = 1; k <= max_k; ++k) {
      curves.absolute_share[k - 1] += cumulative[std::min(k, m)];
    }
    for (std::size_t i = 0; i < relative_steps; ++i) {
      const double target = curves.relative_grid[i] * static_cast<double>(m);
      const auto k = static_cast<std::size_t>(
          std::clamp(std::round(target + 1e-9), 0.0, static_cast<double>(m)));
      curves.relative_share[i] += cumulative[k];
    }
  }
  Require(curves.observations > 0, "sparsity: every map is empty");
  const double n = static_cast<double>(curves.observations);
  for (double& v : curves.absolute_share) v /= n;
  for (double& v : curves.relative_share) v /= n;
  return curves;
}

}  // namespace roarbench::metrics
