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

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "roarbench/data.hpp"
#include "roarbench/errors.hpp"
#include "roarbench/masking.hpp"
#include "roarbench/models.hpp"
#include "roarbench/rng.hpp"

namespace roarbench::data {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("roarbench_data_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string ReadAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Keyword rule reader: predicts the class of the first surviving keyword,
// or -1 when none survives.
int RuleRead(const TokenDataset& ds, const Observation& obs) {
  for (int id : obs.tokens) {
    const std::string& tok = ds.vocabulary.Token(id);
    if (tok.starts_with("key_")) return std::stoi(tok.substr(4));
  }
  return -1;
}

void ExpectBalanced(const std::vector<Observation>& split, std::size_t classes) {
  std::vector<double> counts(classes, 0.0);
  for (const auto& obs : split) counts[static_cast<std::size_t>(obs.label)] += 1.0;
  const double n = static_cast<double>(split.size()), p = 1.0 / static_cast<double>(classes);
  for (double c : counts) EXPECT_NEAR(c, n * p, 3.0 * std::sqrt(n * p * (1 - p)));
}

TEST(Vocabulary, ReservedIdsAreFixed) {
  const Vocabulary v;
  EXPECT_EQ(v.Token(kPad), "[PAD]");
  EXPECT_EQ(v.Token(kMask), "[MASK]");
  EXPECT_EQ(v.Token(kBos), "[BOS]");
  EXPECT_EQ(v.Token(kEos), "[EOS]");
  EXPECT_EQ(v.Token(kSep), "[SEP]");
  EXPECT_EQ(v.size(), static_cast<std::size_t>(kNumReserved));
  EXPECT_FALSE(v.Find("nope").has_value());
}

TEST(Keyword, PlantsExactlyRedundancyCopies) {
  for (std::size_t d : {1u, 2u, 3u}) {
    KeywordParams p;
    p.redundancy = d;
    p.classes = 3;
    p.seed = d;
    const TokenDataset ds = GenerateKeyword(p);
    for (SplitKind split : kAllSplits) {
      for (const auto& obs : ds.split(split)) {
        ASSERT_EQ(obs.tokens.size(), p.length);
        EXPECT_EQ(obs.tokens.front(), kBos);
        EXPECT_EQ(obs.tokens.back(), kEos);
        ASSERT_TRUE(obs.evidence);
        EXPECT_EQ(obs.evidence->size(), d);
        const int keyword = *ds.vocabulary.Find("key_" + std::to_string(obs.label));
        EXPECT_EQ(std::count(obs.tokens.begin(), obs.tokens.end(), keyword), static_cast<long>(d));
        for (int pos : *obs.evidence) EXPECT_EQ(obs.tokens[static_cast<std::size_t>(pos)], keyword);
        for (std::size_t t = 1; t + 1 < obs.tokens.size(); ++t) EXPECT_FALSE(IsStructural(obs.tokens[t]));
        EXPECT_NO_THROW(CheckObservation(obs, ds.vocabulary.size(), ds.num_classes));
      }
    }
    ExpectBalanced(ds.split(SplitKind::kTrain), 3);
  }
}

TEST(Keyword, MaskingEvidenceControlsTheRuleReader) {
  KeywordParams p;
  p.redundancy = 2;
  const TokenDataset ds = GenerateKeyword(p);
  std::size_t one_left = 0, none_left = 0, none_left_correct = 0;
  for (const auto& obs : ds.split(SplitKind::kTest)) {
    masking::MaskState first;
    first.masked = {static_cast<std::size_t>(obs.evidence->front())};
    one_left += RuleRead(ds, masking::ApplyMask(obs, first)) == obs.label;

    masking::MaskState all;
    for (int pos : *obs.evidence) all.masked.push_back(static_cast<std::size_t>(pos));
    std::sort(all.masked.begin(), all.masked.end());
    const Observation stripped = masking::ApplyMask(obs, all);
    ++none_left;
    // No keyword survives; the best the rule can do is the prior.
    EXPECT_EQ(RuleRead(ds, stripped), -1);
    none_left_correct += obs.label == 0;
  }
  EXPECT_EQ(one_left, ds.split(SplitKind::kTest).size());
  EXPECT_NEAR(static_cast<double>(none_left_correct) / static_cast<double>(none_left), 0.5, 0.07);
}

TEST(Keyword, InconsistentParametersAreConfigErrors) {
  KeywordParams p;
  p.redundancy = 11;
  p.length = 12;
  EXPECT_THROW(GenerateKeyword(p), ConfigError);
  p.redundancy = 0;
  EXPECT_THROW(GenerateKeyword(p), ConfigError);
  p = {};
  p.classes = 1;
  EXPECT_THROW(GenerateKeyword(p), ConfigError);
  p = {};
  p.sizes.train = 0;
  EXPECT_THROW(GenerateKeyword(p), ConfigError);
}

TEST(Keyword, SameSeedGivesIdenticalBytes) {
  KeywordParams p;
  p.seed = 7;
  const TokenDataset a = GenerateKeyword(p), b = GenerateKeyword(p);
  for (SplitKind split : kAllSplits) EXPECT_EQ(SplitToJsonl(a, split), SplitToJsonl(b, split));
  EXPECT_EQ(DatasetHash(a), DatasetHash(b));
  p.seed = 8;
  EXPECT_NE(DatasetHash(a), DatasetHash(GenerateKeyword(p)));
}

TEST(Paired, RuleReaderIsPerfectAndEvidenceIsTheLocation) {
  PairedParams p;
  p.statements = 3;
  const TokenDataset ds = GeneratePaired(p);
  EXPECT_TRUE(ds.paired());
  for (const auto& obs : ds.split(SplitKind::kTrain)) {
    ASSERT_TRUE(obs.aux_tokens);
    const int entity = (*obs.aux_tokens)[1];
    // Reader: find "<entity> in <location>" and answer the location.
    int answer = -1;
    for (std::size_t t = 0; t + 2 < obs.tokens.size(); ++t) {
      if (obs.tokens[t] == entity) answer = obs.tokens[t + 2];
    }
    const std::string loc = ds.vocabulary.Token(answer);
    EXPECT_EQ(std::stoi(loc.substr(4)), obs.label);
    ASSERT_EQ(obs.evidence->size(), 1u);
    EXPECT_EQ(obs.tokens[static_cast<std::size_t>(obs.evidence->front())], answer);
  }
  ExpectBalanced(ds.split(SplitKind::kTrain), p.locations);
}

TEST(Paired, SingleStatementStory) {
  PairedParams p;
  p.statements = 1;
  const TokenDataset ds = GeneratePaired(p);
  for (const auto& obs : ds.split(SplitKind::kTest)) {
    ASSERT_EQ(obs.tokens.size(), 5u);  // [BOS] ent in loc [EOS]
    EXPECT_EQ(*obs.evidence, std::vector<int>{3});
  }
  p.entities = 1;
  EXPECT_THROW(GeneratePaired(p), ConfigError);
}

TEST(Leakage, ProbeTracksClassZero) {
  LeakageParams p;
  p.sizes = {20000, 10, 10};
  const TokenDataset ds = GenerateLeakageProbe(p);
  const int probe = *ds.vocabulary.Find("probe");
  std::size_t with_probe = 0, class0_with_probe = 0, with_keyword = 0;
  for (const auto& obs : ds.split(SplitKind::kTrain)) {
    const bool has = std::find(obs.tokens.begin(), obs.tokens.end(), probe) != obs.tokens.end();
    with_probe += has;
    class0_with_probe += has && obs.label == 0;
    with_keyword += !obs.evidence->empty();
  }
  EXPECT_NEAR(static_cast<double>(class0_with_probe) / static_cast<double>(with_probe), 0.6, 0.02);
  EXPECT_NEAR(static_cast<double>(with_keyword) / 20000.0, p.keyword_rate, 0.02);
  ExpectBalanced(ds.split(SplitKind::kTrain), 2);
}

TEST(Jsonl, RoundTripIsByteIdentical) {
  for (const TokenDataset& ds : {GenerateKeyword({.sizes = {1000, 100, 100}}),
                                 GeneratePaired({.sizes = {1000, 100, 100}})}) {
    const fs::path dir = TempDir(ds.generator.kind);
    SaveDataset(ds, dir);
    const TokenDataset back = LoadDataset(dir);
    EXPECT_EQ(DatasetHash(back), DatasetHash(ds));
    for (SplitKind split : kAllSplits) {
      EXPECT_EQ(back.split(split), ds.split(split));
      EXPECT_EQ(SplitToJsonl(back, split), ReadAll(dir / (std::string(SplitName(split)) + ".jsonl")));
    }
    EXPECT_EQ(back.generator.params, ds.generator.params);
    EXPECT_EQ(back.vocabulary.tokens(), ds.vocabulary.tokens());
    fs::remove_all(dir);
  }
}

TEST(Jsonl, MissingLabelReportsItsLine) {
  const TokenDataset ds = GenerateKeyword({.sizes = {3, 1, 1}});
  std::string text = SplitToJsonl(ds, SplitKind::kTrain);
  text += "{\"tokens\":[\"[BOS]\",\"w_0\",\"[EOS]\"],\"aux_tokens\":null,\"evidence\":null}\n";
  try {
    ParseJsonl(text, ds.vocabulary, ds.num_classes);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Jsonl, UnknownTokenIsRejected) {
  const TokenDataset ds = GenerateKeyword({.sizes = {3, 1, 1}});
  const std::string text =
      "{\"tokens\":[\"[BOS]\",\"never_seen\",\"[EOS]\"],\"aux_tokens\":null,\"label\":0,\"evidence\":null}\n";
  try {
    ParseJsonl(text, ds.vocabulary, ds.num_classes);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("never_seen"), std::string::npos);
  }
}

TEST(Jsonl, MalformedJsonAndBadLabel) {
  const TokenDataset ds = GenerateKeyword({.sizes = {3, 1, 1}});
  EXPECT_THROW(ParseJsonl("{not json\n", ds.vocabulary, 2), ParseError);
  EXPECT_THROW(ParseJsonl("{\"tokens\":[\"[BOS]\",\"[EOS]\"],\"aux_tokens\":null,\"label\":5,\"evidence\":null}\n",
                          ds.vocabulary, 2),
               ParseError);
}

TEST(Tabular, StructureOfTheGeneratingProcess) {
  const TabularDataset ds = GenerateTabular({10000, 10, 10}, 3);
  for (std::size_t j = 0; j < kTabularFeatures; ++j) {
    if (j < kTabularInformative) {
      EXPECT_NE(ds.a[j], 0.0);
    } else {
      EXPECT_EQ(ds.a[j], 0.0);
    }
  }
  const TabularSplit& train = ds.split(SplitKind::kTrain);
  double positives = 0.0;
  std::array<double, kTabularFeatures> mean{};
  for (std::size_t i = 0; i < train.size(); ++i) {
    positives += train.labels[i];
    for (std::size_t j = 0; j < kTabularFeatures; ++j) mean[j] += train.features[i][j] / train.size();
  }
  EXPECT_NEAR(positives / train.size(), 0.5, 0.05);
  for (double m : mean) EXPECT_NEAR(m, 0.0, 0.05);
  EXPECT_EQ(TabularHash(ds), TabularHash(GenerateTabular({10000, 10, 10}, 3)));
}

// Bayes rule for y = [z > 0]: sign of E[z | x] = (a/10)^T Sigma^{-1} x with
// Sigma = a a^T / 100 + d d^T + I / 100.
double MonteCarloBayesRate(const TabularDataset& ds, std::size_t n, std::uint64_t seed) {
  Eigen::VectorXd a(kTabularFeatures), d(kTabularFeatures);
  for (std::size_t j = 0; j < kTabularFeatures; ++j) {
    a[static_cast<long>(j)] = ds.a[j];
    d[static_cast<long>(j)] = ds.d[j];
  }
  const Eigen::MatrixXd sigma = a * a.transpose() / 100.0 + d * d.transpose() +
                                Eigen::MatrixXd::Identity(kTabularFeatures, kTabularFeatures) / 100.0;
  const Eigen::VectorXd beta = sigma.ldlt().solve(a / 10.0);
  Rng rng(seed);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.Normal(), eta = rng.Normal();
    Eigen::VectorXd x = a * z / 10.0 + d * eta;
    for (long j = 0; j < x.size(); ++j) x[j] += rng.Normal() / 10.0;
    correct += (beta.dot(x) > 0.0) == (z > 0.0);
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TEST(Tabular, LogisticRegressionApproachesBayesRate) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TabularDataset ds = GenerateTabular({8000, 2000, 10000}, seed);
    const auto model = models::FitLogistic(ds.split(SplitKind::kTrain));
    const double accuracy = models::LogisticAccuracy(model, ds.split(SplitKind::kTest));
    const double bayes = MonteCarloBayesRate(ds, 100000, seed + 100);
    EXPECT_NEAR(accuracy, bayes, 0.03) << "seed " << seed;
  }
}

TEST(Tabular, MaskingInformativeFeaturesGivesChance) {
  const std::vector<std::size_t> informative = {0, 1, 2, 3};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TabularDataset ds = GenerateTabular({8000, 2000, 10000}, seed);
    TabularSplit train = ds.split(SplitKind::kTrain), test = ds.split(SplitKind::kTest);
    for (auto& x : train.features) x = masking::MaskTabular(x, informative);
    for (auto& x : test.features) x = masking::MaskTabular(x, informative);
    EXPECT_NEAR(models::LogisticAccuracy(models::FitLogistic(train), test), 0.5, 0.05);
  }
}

}  // namespace
}  // namespace roarbench::data
