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

#include "roarbench/masking.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <numeric>

#include "roarbench/errors.hpp"

namespace roarbench::masking {

namespace {

// Steps per unit ratio in relative mode; ValidateSchedule guarantees 1/s is
// an integer.
std::size_t RelativeSteps(const StepSchedule& schedule) {
  return static_cast<std::size_t>(std::llround(1.0 / schedule.relative_step));
}

}  // namespace

std::string_view StepModeName(StepMode mode) {
  return mode == StepMode::kRelative ? "relative" : "absolute";
}

StepMode ParseStepMode(std::string_view name) {
  if (name == "relative") return StepMode::kRelative;
  if (name == "absolute") return StepMode::kAbsolute;
  throw ConfigError("unknown step mode '" + std::string(name) + "'");
}

void ValidateSchedule(const StepSchedule& schedule) {
  if (schedule.mode == StepMode::kRelative) {
    const double s = schedule.relative_step;
    if (!(s > 0.0 && s <= 1.0)) {
      throw ConfigError("relative step must lie in (0, 1]");
    }
    const double inverse = 1.0 / s;
    if (std::abs(inverse - std::round(inverse)) > 1e-9) {
      throw ConfigError("relative step must divide 1 into whole steps");
    }
  } else if (schedule.tokens_per_step < 1) {
    throw ConfigError("tokens_per_step must be >= 1");
  }
}

std::vector<double> CurveRatios(const StepSchedule& schedule,
                                std::size_t max_maskable) {
  ValidateSchedule(schedule);
  std::vector<double> ratios;
  if (schedule.mode == StepMode::kRelative) {
    const std::size_t steps = RelativeSteps(schedule);
    for (std::size_t j = 0; j < steps; ++j) {
      ratios.push_back(static_cast<double>(j) / static_cast<double>(steps));
    }
  } else {
    Require(max_maskable >= 1, "absolute schedule needs maskable tokens");
    std::size_t steps = (max_maskable + schedule.tokens_per_step - 1) /
                        schedule.tokens_per_step;
    if (schedule.max_iterations > 0 && schedule.max_iterations < steps) {
      steps = schedule.max_iterations + 1;
    }
    for (std::size_t j = 0; j < steps; ++j) {
      ratios.push_back(std::min(
          1.0, static_cast<double>(j * schedule.tokens_per_step) /
                   static_cast<double>(max_maskable)));
    }
  }
  ratios.push_back(1.0);
  return ratios;
}

std::size_t CumulativeTarget(const StepSchedule& schedule,
                             std::size_t iteration, std::size_t maskable) {
  if (schedule.mode == StepMode::kAbsolute) {
    return std::min(iteration * schedule.tokens_per_step, maskable);
  }
  const std::size_t steps = RelativeSteps(schedule);
  // round(j*M/steps), half away from zero, in exact integer arithmetic.
  const std::size_t target = (2 * iteration * maskable + steps) / (2 * steps);
  return std::min(target, maskable);
}

MaskState ExtendMask(const MaskState& state,
                     const importance::ImportanceMap& map, std::size_t target,
                     bool absolute) {
  Require(map.scores.size() == map.maskable.size(),
          "importance map scores and flags differ in length");
  Require(target >= state.masked.size(),
          "mask target below the current masked count");
  const std::size_t length = map.scores.size();
  std::vector<bool> is_masked(length, false);
  for (std::size_t pos : state.masked) {
    Require(pos < length && map.maskable[pos],
            "masked position is not maskable");
    is_masked[pos] = true;
  }

  std::vector<std::size_t> candidates;
  std::size_t maskable = 0;
  for (std::size_t t = 0; t < length; ++t) {
    if (!map.maskable[t]) continue;
    ++maskable;
    if (is_masked[t]) continue;
    Require(!std::isnan(map.scores[t]), "NaN importance score");
    candidates.push_back(t);
  }

  auto key = [&](std::size_t t) {
    return absolute ? std::abs(map.scores[t]) : map.scores[t];
  };
  MaskState next = state;
  next.target = target;
  next.saturated = target > maskable;
  const std::size_t want = std::min(target, maskable) - state.masked.size();
  std::partial_sort(candidates.begin(),
                    candidates.begin() + static_cast<long>(want),
                    candidates.end(), [&](std::size_t a, std::size_t b) {
                      const double ka = key(a), kb = key(b);
                      return ka != kb ? ka > kb : a < b;
                    });
  next.masked.insert(next.masked.end(), candidates.begin(),
                     candidates.begin() + static_cast<long>(want));
  std::sort(next.masked.begin(), next.masked.end());
  return next;
}

data::Observation ApplyMask(const data::Observation& obs,
                            const MaskState& state) {
  data::Observation out = obs;
  for (std::size_t pos : state.masked) {
    Require(pos < out.tokens.size(), "masked position outside the sequence");
    Require(!data::IsStructural(out.tokens[pos]),
            "cannot mask a structural token");
    out.tokens[pos] = data::kMask;
  }
  return out;
}

std::array<double, data::kTabularFeatures> MaskTabular(
    const std::array<double, data::kTabularFeatures>& features,
    std::span<const std::size_t> masked) {
  std::array<double, data::kTabularFeatures> out = features;
  for (std::size_t j : masked) {
    Require(j < out.size(), "feature index out of range");
    out[j] = 0.0;
  }
  return out;
}

std::string StatesToJsonl(std::span<const MaskState> states) {
  std::string out;
  for (const MaskState& s : states) {
    nlohmann::ordered_json line;
    line["obs_id"] = s.obs_id;
    line["iteration"] = s.iteration;
    line["masked_positions"] = s.masked;
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<MaskState> StatesFromJsonl(std::string_view text) {
  std::vector<MaskState> states;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_number;
    if (line.empty()) continue;
    try {
      const nlohmann::json doc = nlohmann::json::parse(line);
      MaskState s;
      s.obs_id = doc.at("obs_id").get<std::size_t>();
      s.iteration = doc.at("iteration").get<std::size_t>();
      s.masked = doc.at("masked_positions").get<std::vector<std::size_t>>();
      if (!std::is_sorted(s.masked.begin(), s.masked.end())) {
        throw ParseError("masked_positions must be sorted", line_number);
      }
      s.target = s.masked.size();
      states.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_number);
    }
  }
  return states;
}

}  // namespace roarbench::masking
