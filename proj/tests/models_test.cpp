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
#include <map>
#include <numeric>
#include <vector>

#include "roarbench/data.hpp"
#include "roarbench/errors.hpp"
#include "roarbench/models.hpp"
#include "gradient_cases.hpp"
#include "test_util.hpp"

namespace roarbench::models {
namespace {

using grad::ParameterSet;
using grad::Tape;
using grad::Tensor;
using grad::Var;

// Independent scalar re-implementation of the BiLSTM-attention forward pass
// for one unpadded sequence. Written with plain loops over the stored
// parameter tensors; shares no code with the graph builder.
struct Oracle {
  const ParameterSet& p;
  std::size_t h;

  using Vec = std::vector<double>;

  static double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  Vec Embed(int token) const {
    const Tensor& e = p.Get("embedding");
    const std::size_t d = e.dim(1);
    return Vec(e.values().begin() + static_cast<long>(token * d),
               e.values().begin() + static_cast<long>((token + 1) * d));
  }

  // States [T][2H] and the final [2H] (last forward, last backward).
  std::pair<std::vector<Vec>, Vec> Encode(const std::string& prefix,
                                          const std::vector<int>& tokens) const {
    const std::size_t T = tokens.size();
    std::vector<Vec> states(T, Vec(2 * h));
    Vec final(2 * h);
    for (int dir = 0; dir < 2; ++dir) {
      const std::string q = prefix + (dir == 0 ? ".fwd" : ".bwd");
      const Tensor& wih = p.Get(q + ".w_ih");
      const Tensor& whh = p.Get(q + ".w_hh");
      const Tensor& bias = p.Get(q + ".bias");
      Vec hs(h), cs(h);
      for (std::size_t step = 0; step < T; ++step) {
        const std::size_t t = dir == 0 ? step : T - 1 - step;
        const Vec x = Embed(tokens[t]);
        Vec z(4 * h);
        for (std::size_t g = 0; g < 4 * h; ++g) {
          double acc = bias[g];
          for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * wih.at(i, g);
          for (std::size_t i = 0; i < h; ++i) acc += hs[i] * whh.at(i, g);
          z[g] = acc;
        }
        for (std::size_t j = 0; j < h; ++j) {
          const double ig = Sig(z[j]), fg = Sig(z[h + j]);
          const double gg = std::tanh(z[2 * h + j]), og = Sig(z[3 * h + j]);
          cs[j] = fg * cs[j] + ig * gg;
          hs[j] = og * std::tanh(cs[j]);
        }
        for (std::size_t j = 0; j < h; ++j) states[t][dir * h + j] = hs[j];
      }
      for (std::size_t j = 0; j < h; ++j) final[dir * h + j] = hs[j];
    }
    return {states, final};
  }

  Prediction Run(const std::vector<int>& tokens,
                 const std::vector<int>* aux = nullptr) const {
    const auto [states, unused] = Encode(aux ? "encoder_x" : "encoder", tokens);
    Vec query;
    const Tensor& w = p.Get(aux ? "attention.weight_x" : "attention.weight");
    const std::size_t att = w.dim(1);
    if (aux) {
      const Vec hy = Encode("encoder_y", *aux).second;
      const Tensor& wy = p.Get("attention.weight_y");
      query.assign(att, 0.0);
      for (std::size_t a = 0; a < att; ++a) {
        for (std::size_t i = 0; i < 2 * h; ++i) query[a] += hy[i] * wy.at(i, a);
      }
    } else {
      const Tensor& b = p.Get("attention.bias");
      query.assign(b.values().begin(), b.values().end());
    }
    const Tensor& v = p.Get("attention.vector");
    const std::size_t T = tokens.size();
    Vec score(T, -INFINITY);
    double max = -INFINITY;
    for (std::size_t t = 0; t < T; ++t) {
      if (data::IsStructural(tokens[t])) continue;
      double s = 0.0;
      for (std::size_t a = 0; a < att; ++a) {
        double u = query[a];
        for (std::size_t i = 0; i < 2 * h; ++i) u += states[t][i] * w.at(i, a);
        s += std::tanh(u) * v[a];
      }
      score[t] = s;
      max = std::max(max, s);
    }
    Prediction out;
    out.attention.assign(T, 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (score[t] == -INFINITY) continue;
      out.attention[t] = std::exp(score[t] - max);
      total += out.attention[t];
    }
    for (double& a : out.attention) a /= total;
    Vec context(2 * h, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < 2 * h; ++i) context[i] += out.attention[t] * states[t][i];
    }
    const Tensor& ow = p.Get("output.weight");
    const Tensor& ob = p.Get("output.bias");
    for (std::size_t c = 0; c < ow.dim(1); ++c) {
      double acc = ob[c];
      for (std::size_t i = 0; i < 2 * h; ++i) acc += context[i] * ow.at(i, c);
      out.logits.push_back(acc);
    }
    return out;
  }
};

ModelConfig TinyConfig(Architecture arch, std::size_t vocab = 8) {
  ModelConfig config;
  config.architecture = arch;
  config.vocab_size = vocab;
  config.embedding_size = 2;
  config.hidden_size = 2;
  config.num_classes = 3;
  return config;
}

// Random weights everywhere, including biases the initialiser would fix.
TrainedModel RandomModel(const ModelConfig& config, std::uint64_t seed, double scale = 1.0) {
  TrainedModel model;
  model.config = config;
  model.parameters = InitParameters(config, seed);
  Rng rng(DeriveSeed({seed, 77}));
  for (auto& e : model.parameters.entries()) {
    for (double& v : e.value.values()) v = rng.Uniform(-scale, scale);
  }
  return model;
}

std::vector<int> RandomTokens(Rng& rng, std::size_t length, std::size_t vocab) {
  std::vector<int> tokens = {data::kBos};
  while (tokens.size() + 1 < length) {
    tokens.push_back(static_cast<int>(data::kNumReserved + rng.Below(vocab - data::kNumReserved)));
  }
  tokens.push_back(data::kEos);
  return tokens;
}

void ExpectClose(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

TEST(ForwardSingle, MatchesScalarOracleOnTinyInstance) {
  const ModelConfig config = TinyConfig(Architecture::kBiLstmAttentionSingle);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const TrainedModel model = RandomModel(config, seed);
    const std::vector<int> tokens = {5, 7, 6};
    const Prediction got = ForwardSingle(model, tokens);
    const Prediction want = Oracle{model.parameters, 2}.Run(tokens);
    ExpectClose(got.attention, want.attention, 1e-10);
    ExpectClose(got.logits, want.logits, 1e-10);
  }
}

TEST(ForwardPaired, MatchesScalarOracleOnTinyInstance) {
  const ModelConfig config = TinyConfig(Architecture::kBiLstmAttentionPaired);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const TrainedModel model = RandomModel(config, seed);
    const std::vector<int> tokens = {data::kBos, 5, 7, data::kSep, 6, data::kEos};
    const std::vector<int> aux = {data::kBos, 6, data::kEos};
    const Prediction got = ForwardPaired(model, tokens, aux);
    const Prediction want = Oracle{model.parameters, 2}.Run(tokens, &aux);
    ExpectClose(got.attention, want.attention, 1e-10);
    ExpectClose(got.logits, want.logits, 1e-10);
    EXPECT_EQ(got.attention[0], 0.0);
    EXPECT_EQ(got.attention[3], 0.0);
    EXPECT_NEAR(std::accumulate(got.attention.begin(), got.attention.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(ForwardPaired, ZeroAuxiliaryPathReducesToSingleWithoutBias) {
  const TrainedModel paired = RandomModel(TinyConfig(Architecture::kBiLstmAttentionPaired), 3);
  TrainedModel zeroed = paired;
  zeroed.parameters.Get("attention.weight_y").Fill(0.0);

  TrainedModel single;
  single.config = TinyConfig(Architecture::kBiLstmAttentionSingle);
  single.parameters = InitParameters(single.config, 0);
  for (auto& e : single.parameters.entries()) {
    std::string source = e.name;
    if (source.starts_with("encoder.")) source = "encoder_x." + source.substr(8);
    if (source == "attention.weight") source = "attention.weight_x";
    if (source == "attention.bias") {
      e.value.Fill(0.0);
      continue;
    }
    e.value = zeroed.parameters.Get(source);
  }
  const std::vector<int> tokens = {data::kBos, 5, 6, 7, data::kEos};
  const std::vector<int> aux = {data::kBos, 7, data::kEos};
  const Prediction a = ForwardPaired(zeroed, tokens, aux);
  const Prediction b = ForwardSingle(single, tokens);
  ExpectClose(a.logits, b.logits, 1e-12);
  ExpectClose(a.attention, b.attention, 1e-12);
}

TEST(ForwardSingle, SingletonAttentionIsOne) {
  const TrainedModel model = RandomModel(TinyConfig(Architecture::kBiLstmAttentionSingle), 2);
  const std::vector<int> tokens = {6};
  EXPECT_EQ(ForwardSingle(model, tokens).attention, std::vector<double>{1.0});
}

TEST(ForwardSingle, EqualScoresGiveUniformAttention) {
  TrainedModel model = RandomModel(TinyConfig(Architecture::kBiLstmAttentionSingle), 2);
  model.parameters.Get("attention.vector").Fill(0.0);
  const std::vector<int> tokens = {data::kBos, 5, 6, 7, 5, data::kEos};
  const Prediction p = ForwardSingle(model, tokens);
  ExpectClose(p.attention, {0.0, 0.25, 0.25, 0.25, 0.25, 0.0}, 1e-15);
}

TEST(ForwardSingle, AttentionSumsToOneOnRandomModels) {
  Rng rng(17);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    ModelConfig config = TinyConfig(Architecture::kBiLstmAttentionSingle, 12);
    config.embedding_size = 3;
    config.hidden_size = 4;
    const TrainedModel model = RandomModel(config, seed, 2.0);
    const auto tokens = RandomTokens(rng, 3 + rng.Below(10), 12);
    const Prediction p = ForwardSingle(model, tokens);
    EXPECT_NEAR(std::accumulate(p.attention.begin(), p.attention.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(ForwardSingle, EmptySequenceIsContractViolation) {
  const TrainedModel model = RandomModel(TinyConfig(Architecture::kBiLstmAttentionSingle), 1);
  EXPECT_THROW(ForwardSingle(model, {}), ContractViolation);
  const TrainedModel paired = RandomModel(TinyConfig(Architecture::kBiLstmAttentionPaired), 1);
  const std::vector<int> tokens = {5};
  EXPECT_THROW(ForwardPaired(paired, tokens, {}), ContractViolation);
  EXPECT_THROW(ForwardPaired(model, tokens, tokens), ContractViolation);
}

TEST(LinearModel, ReversedSequenceGivesIdenticalLogits) {
  Rng rng(9);
  const TrainedModel model = RandomModel(TinyConfig(Architecture::kLinear, 20), 4);
  for (int trial = 0; trial < 20; ++trial) {
    auto tokens = RandomTokens(rng, 4 + rng.Below(8), 20);
    const auto forward = ForwardSingle(model, tokens).logits;
    std::reverse(tokens.begin(), tokens.end());
    ExpectClose(ForwardSingle(model, tokens).logits, forward, 1e-12);
  }
}

TEST(Batching, PaddedBatchMatchesSingleForward) {
  Rng rng(31);
  for (Architecture arch : {Architecture::kLinear, Architecture::kBiLstmAttentionSingle,
                            Architecture::kBiLstmAttentionPaired}) {
    const TrainedModel model = RandomModel(TinyConfig(arch, 10), 8);
    std::vector<data::Observation> batch;
    for (int i = 0; i < 6; ++i) {
      data::Observation obs;
      obs.tokens = RandomTokens(rng, 3 + rng.Below(7), 10);
      if (arch == Architecture::kBiLstmAttentionPaired) {
        obs.aux_tokens = RandomTokens(rng, 3 + rng.Below(3), 10);
      }
      batch.push_back(obs);
    }
    const auto logits = PredictLogits(model, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Prediction one = arch == Architecture::kBiLstmAttentionPaired
                                 ? ForwardPaired(model, batch[i].tokens, *batch[i].aux_tokens)
                                 : ForwardSingle(model, batch[i].tokens);
      ExpectClose(logits[i], one.logits, 1e-12);
    }
  }
}

TEST(OneHotPath, AgreesWithEmbeddingLookup) {
  Rng rng(6);
  for (Architecture arch : {Architecture::kLinear, Architecture::kBiLstmAttentionSingle,
                            Architecture::kBiLstmAttentionPaired}) {
    const TrainedModel model = RandomModel(TinyConfig(arch, 10), 5);
    std::vector<data::Observation> observations(4);
    for (auto& obs : observations) {
      obs.tokens = RandomTokens(rng, 5 + rng.Below(4), 10);
      if (arch == Architecture::kBiLstmAttentionPaired) obs.aux_tokens = RandomTokens(rng, 3, 10);
    }
    const Batch batch = MakeBatch(observations);
    Tape tape;
    const BoundParameters params = BindParameters(tape, model.parameters, false);
    const Tensor lookup = BuildForward(tape, model.config, params, batch).logits.value();
    std::vector<Var> one_hot;
    for (std::size_t t = 0; t < batch.length; ++t) {
      one_hot.push_back(tape.Leaf(OneHotColumn(batch, t, model.config.vocab_size)));
    }
    const Tensor via_one_hot =
        BuildForward(tape, model.config, params, batch, one_hot).logits.value();
    for (std::size_t i = 0; i < lookup.size(); ++i) {
      EXPECT_NEAR(lookup[i], via_one_hot[i], 1e-10);
    }
  }
}

void CheckParameterGradients(Architecture arch) {
  for (int instance = 0; instance < 20; ++instance) {
    EXPECT_LT(testing::ParameterGradientError(arch, instance), testing::kFdTolerance)
        << ArchitectureName(arch) << " instance " << instance;
  }
}

TEST(ParameterGradients, LinearMatchesFiniteDifferences) {
  CheckParameterGradients(Architecture::kLinear);
}

TEST(ParameterGradients, SingleBiLstmMatchesFiniteDifferences) {
  CheckParameterGradients(Architecture::kBiLstmAttentionSingle);
}

TEST(ParameterGradients, PairedBiLstmMatchesFiniteDifferences) {
  CheckParameterGradients(Architecture::kBiLstmAttentionPaired);
}

data::TokenDataset KeywordData(std::uint64_t seed) {
  data::KeywordParams params;
  params.sizes = {500, 200, 500};
  params.seed = seed;
  return data::GenerateKeyword(params);
}

ModelConfig KeywordConfig(const data::TokenDataset& ds, Architecture arch) {
  ModelConfig config;
  config.architecture = arch;
  config.vocab_size = ds.vocabulary.size();
  config.num_classes = ds.num_classes;
  config.embedding_size = 8;
  config.hidden_size = 8;
  config.max_epochs = 10;
  config.optimizer.learning_rate = 1e-2;
  return config;
}

TEST(Train, KeywordTaskIsLearned) {
  const auto ds = KeywordData(11);
  const auto& test = ds.split(data::SplitKind::kTest);

  // Rule reader: the label is the class whose keyword occurs most often.
  std::size_t rule_correct = 0;
  for (const auto& obs : test) {
    std::map<int, int> counts;
    for (int pos : *obs.evidence) ++counts[obs.tokens[static_cast<std::size_t>(pos)]];
    const int keyword = std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) {
                          return a.second < b.second;
                        })->first;
    const int predicted = keyword == *ds.vocabulary.Find("key_0") ? 0 : 1;
    rule_correct += predicted == obs.label;
  }
  EXPECT_EQ(rule_correct, test.size());

  for (Architecture arch : {Architecture::kLinear, Architecture::kBiLstmAttentionSingle}) {
    const TrainedModel model = Train(KeywordConfig(ds, arch), ds.split(data::SplitKind::kTrain),
                                     ds.split(data::SplitKind::kValidation), 1);
    EXPECT_GT(Evaluate(model, test, metrics::MetricKind::kAccuracy), 0.95)
        << ArchitectureName(arch);
  }
}

TEST(Train, ShuffledLabelsGiveChanceAccuracy) {
  auto ds = KeywordData(12);
  Rng rng(3);
  // Labels are redrawn in every split, so no split carries signal.
  for (auto split : data::kAllSplits) {
    for (auto& obs : ds.split(split)) obs.label = static_cast<int>(rng.Below(2));
  }
  const TrainedModel model =
      Train(KeywordConfig(ds, Architecture::kLinear), ds.split(data::SplitKind::kTrain),
            ds.split(data::SplitKind::kValidation), 1);
  EXPECT_NEAR(Evaluate(model, ds.split(data::SplitKind::kTest), metrics::MetricKind::kAccuracy),
              0.5, 0.1);
}

TEST(Train, DeterministicAndSelectsBestValidationLoss) {
  const auto ds = KeywordData(13);
  ModelConfig config = KeywordConfig(ds, Architecture::kBiLstmAttentionSingle);
  config.max_epochs = 4;
  const auto& train = ds.split(data::SplitKind::kTrain);
  const auto& val = ds.split(data::SplitKind::kValidation);
  const TrainedModel a = Train(config, train, val, 5);
  const TrainedModel b = Train(config, train, val, 5);
  EXPECT_EQ(a.parameters, b.parameters);
  ASSERT_EQ(a.history.size(), 4u);
  const double selected = MeanLoss(config, a.parameters, val);
  for (const auto& epoch : a.history) EXPECT_LE(selected, epoch.validation_loss + 1e-12);
  EXPECT_TRUE(HistoryCsv(a).starts_with("epoch,train_loss,val_loss\n"));

  const TrainedModel c = Train(config, train, val, 6);
  EXPECT_FALSE(a.parameters == c.parameters);
}

TEST(Train, EmptySplitIsRejected) {
  const auto ds = KeywordData(14);
  const ModelConfig config = KeywordConfig(ds, Architecture::kLinear);
  EXPECT_THROW(Train(config, {}, ds.split(data::SplitKind::kValidation), 1), Error);
  EXPECT_THROW(Train(config, ds.split(data::SplitKind::kTrain), {}, 1), Error);
}

TEST(Config, ValidationAndJsonRoundTrip) {
  ModelConfig config = TinyConfig(Architecture::kBiLstmAttentionPaired, 9);
  EXPECT_EQ(ConfigToJson(ConfigFromJson(ConfigToJson(config))), ConfigToJson(config));
  config.num_classes = 1;
  EXPECT_THROW(ValidateConfig(config), ConfigError);
  config.num_classes = 2;
  config.vocab_size = 3;
  EXPECT_THROW(ValidateConfig(config), ConfigError);
  EXPECT_THROW(ParseArchitecture("transformer"), ConfigError);
}

TEST(Evaluate, UnknownMetricIsConfigError) {
  EXPECT_THROW(metrics::ParseMetric("auc"), ConfigError);
}

}  // namespace
}  // namespace roarbench::models
