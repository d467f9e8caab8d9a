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

// Token datasets with a closed vocabulary, the synthetic generators that
// plant known evidence, and JSONL persistence.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace roarbench::data {

inline constexpr int kPad = 0;
inline constexpr int kMask = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kSep = 4;
inline constexpr int kNumReserved = 5;

// Structural tokens that are never attended to, ranked, or masked.
// [MASK] is not structural: a masked position stays a content position.
inline bool IsStructural(int id) {
  return id == kPad || id == kBos || id == kEos || id == kSep;
}

class Vocabulary {
 public:
  Vocabulary();

  int Add(const std::string& token);
  std::optional<int> Find(std::string_view token) const;
  const std::string& Token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary FromTokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct Observation {
  std::vector<int> tokens;
  std::optional<std::vector<int>> aux_tokens;
  int label = 0;
  std::optional<std::vector<int>> evidence;

  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class SplitKind { kTrain = 0, kValidation = 1, kTest = 2 };
inline constexpr std::array<SplitKind, 3> kAllSplits = {
    SplitKind::kTrain, SplitKind::kValidation, SplitKind::kTest};
std::string_view SplitName(SplitKind split);

struct GeneratorInfo {
  std::string kind;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
};

struct TokenDataset {
  Vocabulary vocabulary;
  std::size_t num_classes = 2;
  std::array<std::vector<Observation>, 3> splits;
  GeneratorInfo generator;

  std::vector<Observation>& split(SplitKind kind) {
    return splits[static_cast<std::size_t>(kind)];
  }
  const std::vector<Observation>& split(SplitKind kind) const {
    return splits[static_cast<std::size_t>(kind)];
  }
  bool paired() const;
};

// Maskable positions: every primary-sequence position whose token is not
// structural.
std::vector<bool> MaskablePositions(const Observation& obs);

// Throws ContractViolation when an observation breaks a dataset invariant
// ([BOS] ... [EOS] framing, labels in range, ids inside the vocabulary).
void CheckObservation(const Observation& obs, std::size_t vocab_size,
                      std::size_t num_classes);

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t validation = 500;
  std::size_t test = 500;
};

struct KeywordParams {
  SplitSizes sizes;
  std::size_t classes = 2;
  std::size_t distractors = 20;
  // Copies of the class keyword planted per sequence.
  std::size_t redundancy = 2;
  // Full length including [BOS] and [EOS].
  std::size_t length = 12;
  std::uint64_t seed = 0;
};

// Every sequence holds exactly `redundancy` copies of its class keyword at
// distinct uniformly drawn positions; the rest are label-independent
// distractors.
TokenDataset GenerateKeyword(const KeywordParams& params);

struct PairedParams {
  SplitSizes sizes;
  std::size_t entities = 4;
  std::size_t locations = 4;
  // Statements per story ("<entity> in <location>"), separated by [SEP].
  std::size_t statements = 3;
  std::uint64_t seed = 0;
};

// Primary sequence: a story of entity-location statements. Auxiliary
// sequence: [BOS] <entity> [EOS]. Label: the queried entity's location.
TokenDataset GeneratePaired(const PairedParams& params);

struct LeakageParams {
  SplitSizes sizes;
  std::size_t distractors = 20;
  std::size_t length = 12;
  // Probability that the class keyword is planted at all.
  double keyword_rate = 0.7;
  // Probe token rates per class; 0.6 / 0.4 gives the probe 60 % precision
  // for class 0 under balanced classes.
  double probe_rate_class0 = 0.6;
  double probe_rate_class1 = 0.4;
  std::uint64_t seed = 0;
};

// Binary keyword task with a weakly class-0-correlated probe token.
TokenDataset GenerateLeakageProbe(const LeakageParams& params);

// Serialisation. Records: {"tokens", "aux_tokens", "label", "evidence"}.
std::string SplitToJsonl(const TokenDataset& dataset, SplitKind split);
nlohmann::ordered_json MetadataJson(const TokenDataset& dataset);
std::string DatasetHash(const TokenDataset& dataset);

// Directory layout: metadata.json, train.jsonl, validation.jsonl, test.jsonl.
void SaveDataset(const TokenDataset& dataset,
                 const std::filesystem::path& directory);
TokenDataset LoadDataset(const std::filesystem::path& directory);
// Parses one split given the metadata's vocabulary. Errors carry line numbers.
std::vector<Observation> ParseJsonl(std::string_view text,
                                    const Vocabulary& vocabulary,
                                    std::size_t num_classes);

// Dense 16-feature problem x = a z / 10 + d eta + eps / 10, y = [z > 0].
inline constexpr std::size_t kTabularFeatures = 16;
inline constexpr std::size_t kTabularInformative = 4;

struct TabularSplit {
  std::vector<std::array<double, kTabularFeatures>> features;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

struct TabularDataset {
  std::array<double, kTabularFeatures> a{};
  std::array<double, kTabularFeatures> d{};
  std::array<TabularSplit, 3> splits;
  std::uint64_t seed = 0;

  const TabularSplit& split(SplitKind kind) const {
    return splits[static_cast<std::size_t>(kind)];
  }
};

TabularDataset GenerateTabular(const SplitSizes& sizes, std::uint64_t seed);
// Fresh samples drawn with the dataset's a and d.
TabularSplit SampleTabular(const TabularDataset& dataset, std::size_t n,
                           std::uint64_t seed);
void SaveTabular(const TabularDataset& dataset,
                 const std::filesystem::path& directory);
std::string TabularHash(const TabularDataset& dataset);

}  // namespace roarbench::data
