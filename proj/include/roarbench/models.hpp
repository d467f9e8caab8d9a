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

// Trainable sequence classifiers: a bag-of-words linear model and
// BiLSTM encoders with additive attention (single- and paired-sequence), plus
// the logistic-regression model used on the dense synthetic problem.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roarbench/autodiff.hpp"
#include "roarbench/data.hpp"
#include "roarbench/metrics.hpp"
#include "roarbench/optimizer.hpp"

namespace roarbench::models {

enum class Architecture {
  kLinear,
  kBiLstmAttentionSingle,
  kBiLstmAttentionPaired,
};

std::string_view ArchitectureName(Architecture arch);
Architecture ParseArchitecture(std::string_view name);

struct ModelConfig {
  Architecture architecture = Architecture::kBiLstmAttentionSingle;
  std::size_t vocab_size = 0;
  std::size_t embedding_size = 16;
  // Per direction.
  std::size_t hidden_size = 16;
  std::size_t num_classes = 2;
  std::size_t max_epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  grad::OptimizerConfig optimizer;
};

void ValidateConfig(const ModelConfig& config);
nlohmann::ordered_json ConfigToJson(const ModelConfig& config);
ModelConfig ConfigFromJson(const nlohmann::ordered_json& doc);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainedModel {
  ModelConfig config;
  // Parameters from the epoch with the lowest validation loss.
  grad::ParameterSet parameters;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

// "epoch,train_loss,val_loss" with one row per epoch.
std::string HistoryCsv(const TrainedModel& model);

grad::ParameterSet InitParameters(const ModelConfig& config,
                                  std::uint64_t seed);

// Right-padded batch. Positions past a sequence's end hold [PAD].
struct Batch {
  std::size_t size = 0;
  std::size_t length = 0;
  std::vector<int> tokens;  // size x length, row-major
  std::size_t aux_length = 0;
  std::vector<int> aux_tokens;  // size x aux_length
  std::vector<int> labels;

  int token(std::size_t b, std::size_t t) const {
    return tokens[b * length + t];
  }
};

Batch MakeBatch(std::span<const data::Observation* const> observations);
Batch MakeBatch(std::span<const data::Observation> observations);

// Parameters bound onto a tape, in parameter-set order.
struct BoundParameters {
  const grad::ParameterSet* source = nullptr;
  std::vector<grad::Var> vars;

  grad::Var Get(std::string_view name) const;
};

// `trainable` selects leaves (gradients wanted) or constants.
BoundParameters BindParameters(grad::Tape& tape,
                               const grad::ParameterSet& params,
                               bool trainable);

struct GraphOutput {
  grad::Var logits;     // [B x C]
  grad::Var attention;  // [B x T]; unbound for the linear model
};

// Builds the forward graph for a batch. When `one_hot` is non-empty it holds
// one [B x V] encoding per primary position and replaces the embedding
// lookup, so gradients with respect to the encoding can be taken.
GraphOutput BuildForward(grad::Tape& tape, const ModelConfig& config,
                         const BoundParameters& params, const Batch& batch,
                         std::span<const grad::Var> one_hot = {});

// Tensor [B x V] with a 1 at each row's token id for position t, times
// `scale`.
grad::Tensor OneHotColumn(const Batch& batch, std::size_t t,
                          std::size_t vocab_size, double scale = 1.0);

struct Prediction {
  std::vector<double> logits;
  // Empty for the linear model.
  std::vector<double> attention;
};

Prediction ForwardSingle(const TrainedModel& model,
                         std::span<const int> tokens);
Prediction ForwardPaired(const TrainedModel& model,
                         std::span<const int> tokens,
                         std::span<const int> aux_tokens);

// Logits for many observations, batched internally.
std::vector<std::vector<double>> PredictLogits(
    const TrainedModel& model, std::span<const data::Observation> observations);
std::vector<int> Predict(const TrainedModel& model,
                         std::span<const data::Observation> observations);
double MeanLoss(const ModelConfig& config, const grad::ParameterSet& params,
                std::span<const data::Observation> observations);

// Trains for max_epochs with the configured optimizer and keeps the
// parameters of the best validation-loss epoch. Deterministic in `seed`
// (initialisation, shuffling and batching). Throws NumericFailure if the loss
// diverges.
TrainedModel Train(const ModelConfig& config,
                   std::span<const data::Observation> train,
                   std::span<const data::Observation> validation,
                   std::uint64_t seed);

double Evaluate(const TrainedModel& model,
                std::span<const data::Observation> observations,
                metrics::MetricKind metric);

// Logistic regression on the dense 16-feature problem.
struct LogisticModel {
  std::array<double, data::kTabularFeatures> weights{};
  double bias = 0.0;

  int Predict(const std::array<double, data::kTabularFeatures>& x) const;
};

// Newton-Raphson fit of the L2-penalised (weights only) log-likelihood.
LogisticModel FitLogistic(const data::TabularSplit& train,
                          double l2_penalty = 1e-5);
double LogisticAccuracy(const LogisticModel& model,
                        const data::TabularSplit& split);

}  // namespace roarbench::models
