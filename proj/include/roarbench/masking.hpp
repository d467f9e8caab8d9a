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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roarbench/data.hpp"
#include "roarbench/importance.hpp"

namespace roarbench::masking {

enum class StepMode { kRelative, kAbsolute };

std::string_view StepModeName(StepMode mode);
StepMode ParseStepMode(std::string_view name);

struct StepSchedule {
  StepMode mode = StepMode::kRelative;
  // Must divide 1 exactly (0.1, 0.2, 0.25, ...).
  double relative_step = 0.1;
  std::size_t tokens_per_step = 1;
  // Absolute mode only; 0 means run until every observation saturates.
  std::size_t max_iterations = 0;
};

// Throws ConfigError on an unusable schedule.
void ValidateSchedule(const StepSchedule& schedule);

// Curve abscissae for iterations 0..J. The last entry is always 1.0 (every
// maskable token masked). Relative mode: j*s. Absolute mode: j*step/max_M,
// with `max_iterations` capping the masked steps before the final point.
// `max_maskable` is the largest maskable count in the data.
std::vector<double> CurveRatios(const StepSchedule& schedule,
                                std::size_t max_maskable);

// Masked-token count after iteration j for an observation with M maskable
// positions. Relative mode rounds j*s*M half away from zero.
std::size_t CumulativeTarget(const StepSchedule& schedule,
                             std::size_t iteration, std::size_t maskable);

struct MaskState {
  std::size_t obs_id = 0;
  std::size_t iteration = 0;
  std::size_t target = 0;
  // Sorted ascending.
  std::vector<std::size_t> masked;
  // Set when the requested target exceeded the maskable count.
  bool saturated = false;

  friend bool operator==(const MaskState&, const MaskState&) = default;
};

// Adds the highest-scoring unmasked maskable positions until min(target, M)
// positions are masked. Ties go to the lower index. With `absolute` the
// ranking uses |score|.
MaskState ExtendMask(const MaskState& state, const importance::ImportanceMap& map,
                     std::size_t target, bool absolute = false);

// Replaces masked positions with [MASK]; length is unchanged.
data::Observation ApplyMask(const data::Observation& obs,
                            const MaskState& state);

// Masked features are replaced by 0, the population mean.
std::array<double, data::kTabularFeatures> MaskTabular(
    const std::array<double, data::kTabularFeatures>& features,
    std::span<const std::size_t> masked);

// JSONL: {obs_id, iteration, masked_positions} per line.
std::string StatesToJsonl(std::span<const MaskState> states);
// Inverse of StatesToJsonl; `target` is restored as the masked count.
// Throws ParseError with the offending line.
std::vector<MaskState> StatesFromJsonl(std::string_view text);

}  // namespace roarbench::masking

