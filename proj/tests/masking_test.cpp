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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "roarbench/errors.hpp"
#include "roarbench/masking.hpp"
#include "roarbench/rng.hpp"

namespace roarbench::masking {
namespace {

using importance::ImportanceMap;

constexpr int kTrials = 1000;

StepSchedule Relative(double step) {
  StepSchedule s;
  s.relative_step = step;
  return s;
}

ImportanceMap MapFromScores(std::vector<double> scores, std::vector<bool> maskable = {}) {
  ImportanceMap map;
  if (maskable.empty()) maskable.assign(scores.size(), true);
  map.scores = std::move(scores);
  map.maskable = std::move(maskable);
  return map;
}

// Random map with ties drawn from a small value set and some positions
// excluded.
ImportanceMap RandomMap(Rng& rng) {
  const std::size_t length = 1 + rng.Below(20);
  ImportanceMap map;
  for (std::size_t t = 0; t < length; ++t) {
    map.scores.push_back(static_cast<double>(rng.Below(5)) - 2.0);
    map.maskable.push_back(rng.Below(5) != 0);
  }
  return map;
}

std::size_t CountMaskable(const ImportanceMap& map) {
  return static_cast<std::size_t>(std::count(map.maskable.begin(), map.maskable.end(), true));
}

// Top-k over maskable positions of frozen scores: score descending, index
// ascending. Written independently of ExtendMask.
std::vector<std::size_t> TopK(const ImportanceMap& map, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t t = 0; t < map.scores.size(); ++t) {
    if (map.maskable[t]) ranked.emplace_back(-map.scores[t], t);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(CumulativeTarget, ExamplesFromTheSchedule) {
  EXPECT_EQ(CumulativeTarget(Relative(0.1), 1, 10), 1u);
  EXPECT_EQ(CumulativeTarget(Relative(0.1), 0, 10), 0u);
  EXPECT_EQ(CumulativeTarget(Relative(0.1), 3, 7), 2u);
  // 0.5 * 5 = 2.5 rounds away from zero.
  EXPECT_EQ(CumulativeTarget(Relative(0.5), 1, 5), 3u);
  EXPECT_EQ(CumulativeTarget(Relative(0.1), 5, 7), 4u);
}

TEST(CumulativeTarget, MonotoneAndSaturatesAtFinalIteration) {
  for (double step : {0.1, 0.2, 0.25, 0.5, 1.0}) {
    const StepSchedule s = Relative(step);
    const std::size_t last = static_cast<std::size_t>(std::lround(1.0 / step));
    for (std::size_t m = 0; m <= 40; ++m) {
      std::size_t prev = 0;
      for (std::size_t j = 0; j <= last; ++j) {
        const std::size_t t = CumulativeTarget(s, j, m);
        EXPECT_GE(t, prev);
        EXPECT_LE(t, m);
        // Independent rounding oracle.
        EXPECT_EQ(t, static_cast<std::size_t>(std::floor(static_cast<double>(j * m) /
                                                         static_cast<double>(last) + 0.5)));
        prev = t;
      }
      EXPECT_EQ(CumulativeTarget(s, last, m), m);
    }
  }
}

TEST(CumulativeTarget, AbsoluteModeAddsTokensPerStep) {
  StepSchedule s;
  s.mode = StepMode::kAbsolute;
  s.tokens_per_step = 2;
  EXPECT_EQ(CumulativeTarget(s, 0, 5), 0u);
  EXPECT_EQ(CumulativeTarget(s, 2, 5), 4u);
  EXPECT_EQ(CumulativeTarget(s, 3, 5), 5u);
}

TEST(CurveRatios, RelativeGridHasElevenPoints) {
  const auto r = CurveRatios(Relative(0.1), 10);
  ASSERT_EQ(r.size(), 11u);
  for (std::size_t j = 0; j < r.size(); ++j) EXPECT_NEAR(r[j], 0.1 * static_cast<double>(j), 1e-15);
  EXPECT_EQ(r.back(), 1.0);
}

TEST(CurveRatios, AbsoluteGridCapsIterations) {
  StepSchedule s;
  s.mode = StepMode::kAbsolute;
  EXPECT_EQ(CurveRatios(s, 4), (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
  s.max_iterations = 2;
  EXPECT_EQ(CurveRatios(s, 4), (std::vector<double>{0, 0.25, 0.5, 1.0}));
}

TEST(Schedule, RejectsStepsThatDoNotDivideOne) {
  EXPECT_THROW(ValidateSchedule(Relative(0.3)), ConfigError);
  EXPECT_THROW(ValidateSchedule(Relative(0.0)), ConfigError);
  StepSchedule s;
  s.mode = StepMode::kAbsolute;
  s.tokens_per_step = 0;
  EXPECT_THROW(ValidateSchedule(s), ConfigError);
  EXPECT_THROW(ParseStepMode("geometric"), ConfigError);
}

TEST(ExtendMask, HighestScoreMaskedFirst) {
  // "[BOS] The movie is great . [EOS]" with "great" scored highest.
  const ImportanceMap map = MapFromScores({0, 0.1, 0.2, 0.05, 0.9, 0.01, 0},
                                          {false, true, true, true, true, true, false});
  const MaskState next = ExtendMask(MaskState{}, map, 1);
  EXPECT_EQ(next.masked, std::vector<std::size_t>{4});
}

TEST(ExtendMask, EqualScoresBreakTiesByIndex) {
  const MaskState next = ExtendMask(MaskState{}, MapFromScores({1, 1, 1, 1}), 2);
  EXPECT_EQ(next.masked, (std::vector<std::size_t>{0, 1}));
}

TEST(ExtendMask, TargetEqualToCurrentCountKeepsState) {
  MaskState state;
  state.masked = {1, 2};
  state.target = 2;
  const MaskState next = ExtendMask(state, MapFromScores({5, 4, 3, 2}), 2);
  EXPECT_EQ(next.masked, state.masked);
  EXPECT_FALSE(next.saturated);
}

TEST(ExtendMask, OverTargetClampsAndFlagsSaturation) {
  const ImportanceMap map = MapFromScores({1, 2, 3}, {true, false, true});
  const MaskState next = ExtendMask(MaskState{}, map, 5);
  EXPECT_EQ(next.masked, (std::vector<std::size_t>{0, 2}));
  EXPECT_TRUE(next.saturated);
}

TEST(ExtendMask, AbsoluteRankingUsesMagnitude) {
  const ImportanceMap map = MapFromScores({0.5, -2.0, 1.0});
  EXPECT_EQ(ExtendMask(MaskState{}, map, 1, false).masked, std::vector<std::size_t>{2});
  EXPECT_EQ(ExtendMask(MaskState{}, map, 1, true).masked, std::vector<std::size_t>{1});
}

TEST(ExtendMask, TargetBelowCurrentIsContractViolation) {
  MaskState state;
  state.masked = {0, 1};
  EXPECT_THROW(ExtendMask(state, MapFromScores({1, 1, 1}), 1), ContractViolation);
}

TEST(MaskingInvariants, RandomizedChainsAreMonotoneExactAndDeterministic) {
  Rng rng(2024);
  for (int trial = 0; trial < kTrials; ++trial) {
    const StepSchedule schedule = Relative(rng.Below(2) ? 0.1 : 0.25);
    const std::size_t last = static_cast<std::size_t>(std::lround(1.0 / schedule.relative_step));
    MaskState state;
    ImportanceMap map = RandomMap(rng);
    const std::size_t m = CountMaskable(map);
    for (std::size_t j = 1; j <= last; ++j) {
      // Recursive ROAR: scores change every iteration.
      for (auto& s : map.scores) s = static_cast<double>(rng.Below(5)) - 2.0;
      const std::size_t target = CumulativeTarget(schedule, j, m);
      const MaskState before = state;
      const MaskState next = ExtendMask(state, map, target);
      EXPECT_EQ(state, before) << "input state modified";
      EXPECT_EQ(next, ExtendMask(state, map, target)) << "non-deterministic";
      EXPECT_TRUE(std::includes(next.masked.begin(), next.masked.end(), state.masked.begin(),
                                state.masked.end()));
      EXPECT_EQ(next.masked.size(), std::min(target, m));
      EXPECT_TRUE(std::is_sorted(next.masked.begin(), next.masked.end()));
      for (std::size_t pos : next.masked) EXPECT_TRUE(map.maskable[pos]);
      state = next;
    }
    EXPECT_EQ(state.masked.size(), m);
  }
}

TEST(MaskingInvariants, TieBreakPrefersLowerIndexAmongEqualScores) {
  Rng rng(77);
  for (int trial = 0; trial < kTrials; ++trial) {
    const ImportanceMap map = RandomMap(rng);
    const std::size_t m = CountMaskable(map);
    const std::size_t k = rng.Below(m + 1);
    const MaskState next = ExtendMask(MaskState{}, map, k);
    if (k == 0 || k == m) continue;
    // The weakest selected score; any unselected position with that score
    // must come after every selected position holding it.
    double weakest = INFINITY;
    for (std::size_t pos : next.masked) weakest = std::min(weakest, map.scores[pos]);
    std::size_t last_selected = 0;
    for (std::size_t pos : next.masked) {
      if (map.scores[pos] == weakest) last_selected = std::max(last_selected, pos);
    }
    const std::set<std::size_t> chosen(next.masked.begin(), next.masked.end());
    for (std::size_t t = 0; t < map.scores.size(); ++t) {
      if (!map.maskable[t] || chosen.count(t)) continue;
      EXPECT_LE(map.scores[t], weakest);
      if (map.scores[t] == weakest) {
        EXPECT_GT(t, last_selected);
      }
    }
  }
}

TEST(MaskingInvariants, FrozenScoresReproduceDirectTopK) {
  Rng rng(99);
  for (int trial = 0; trial < kTrials; ++trial) {
    const ImportanceMap map = RandomMap(rng);
    const StepSchedule schedule = Relative(0.1);
    const std::size_t m = CountMaskable(map);
    MaskState state;
    for (std::size_t j = 1; j <= 10; ++j) {
      const std::size_t target = CumulativeTarget(schedule, j, m);
      state = ExtendMask(state, map, target);
      EXPECT_EQ(state.masked, TopK(map, target)) << "trial " << trial << " j " << j;
    }
  }
}

TEST(MaskingInvariants, PositiveScalingLeavesSelectionUnchanged) {
  Rng rng(5);
  for (int trial = 0; trial < kTrials; ++trial) {
    ImportanceMap map = RandomMap(rng);
    for (auto& s : map.scores) s = rng.Normal();
    const std::size_t k = rng.Below(CountMaskable(map) + 1);
    ImportanceMap scaled = map;
    const double c = std::exp(rng.Uniform(-5, 5));
    for (auto& s : scaled.scores) s *= c;
    EXPECT_EQ(ExtendMask(MaskState{}, map, k).masked, ExtendMask(MaskState{}, scaled, k).masked);
  }
}

TEST(ApplyMask, KeepsLengthAndStructure) {
  data::Observation obs;
  obs.tokens = {data::kBos, 7, 8, 9, 10, 11, 12, 13, 14, data::kEos};
  EXPECT_EQ(ApplyMask(obs, MaskState{}), obs);

  MaskState two;
  two.masked = {3, 6};
  const auto masked = ApplyMask(obs, two);
  EXPECT_EQ(masked.tokens.size(), 10u);
  EXPECT_EQ(masked.tokens[3], data::kMask);
  EXPECT_EQ(masked.tokens[6], data::kMask);
  EXPECT_EQ(masked.tokens[4], 10);

  MaskState all;
  const auto maskable = data::MaskablePositions(obs);
  for (std::size_t t = 0; t < maskable.size(); ++t) {
    if (maskable[t]) all.masked.push_back(t);
  }
  const auto full = ApplyMask(obs, all);
  EXPECT_EQ(full.tokens.front(), data::kBos);
  EXPECT_EQ(full.tokens.back(), data::kEos);
  for (std::size_t t = 1; t + 1 < full.tokens.size(); ++t) EXPECT_EQ(full.tokens[t], data::kMask);

  MaskState bad;
  bad.masked = {0};
  EXPECT_THROW(ApplyMask(obs, bad), ContractViolation);
}

TEST(MaskTabular, ZeroesSelectedFeatures) {
  std::array<double, data::kTabularFeatures> x{};
  std::iota(x.begin(), x.end(), 1.0);
  EXPECT_EQ(MaskTabular(x, {}), x);
  std::vector<std::size_t> every(data::kTabularFeatures);
  std::iota(every.begin(), every.end(), 0);
  for (double v : MaskTabular(x, every)) EXPECT_EQ(v, 0.0);
  const std::size_t some[] = {2, 5};
  const auto y = MaskTabular(x, some);
  EXPECT_EQ(y[2], 0.0);
  EXPECT_EQ(y[5], 0.0);
  EXPECT_EQ(y[3], 4.0);
}

TEST(Jsonl, RoundTripsAndReportsLineNumbers) {
  std::vector<MaskState> states(3);
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].obs_id = i;
    states[i].iteration = 2;
    states[i].masked = {i, i + 3};
    states[i].target = 2;
  }
  EXPECT_EQ(StatesFromJsonl(StatesToJsonl(states)), states);
  const std::string bad =
      "{\"obs_id\":0,\"iteration\":1,\"masked_positions\":[1]}\n{\"obs_id\":1}\n";
  try {
    StatesFromJsonl(bad);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace roarbench::masking
