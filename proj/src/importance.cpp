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

#include "roarbench/importance.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

#include "roarbench/errors.hpp"
#include "roarbench/rng.hpp"

namespace roarbench::importance {

using grad::Shape;
using grad::Tape;
using grad::Tensor;
using grad::Var;

namespace {

constexpr std::array<std::pair<Measure, std::string_view>, 7> kMeasureNames = {{
    {Measure::kAttention, "attention"},
    {Measure::kGradient, "gradient"},
    {Measure::kInputTimesGradient, "input-x-gradient"},
    {Measure::kIntegratedGradient, "integrated-gradient"},
    {Measure::kRandom, "random"},
    {Measure::kOracle, "oracle"},
    {Measure::kOracleFirst, "oracle-first"},
}};

constexpr std::size_t kRowsPerTape = 256;

struct GradRequest {
  const data::Observation* obs = nullptr;
  int label = 0;
  double alpha = 1.0;
};

struct GradResult {
  std::vector<double> gradient;  // [T x V] row-major
  double gold_logit = 0.0;
};

// Gradients of each row's gold logit with respect to its scaled one-hot
// encoding. One tape per call.
std::vector<GradResult> OneHotGradients(const models::TrainedModel& model,
                                        std::span<const GradRequest> requests) {
  std::vector<const data::Observation*> ptrs;
  for (const auto& r : requests) ptrs.push_back(r.obs);
  const models::Batch batch = models::MakeBatch(ptrs);
  const std::size_t vocab = model.config.vocab_size;
  const std::size_t classes = model.config.num_classes;

  Tape tape;
  const models::BoundParameters params =
      models::BindParameters(tape, model.parameters, false);
  std::vector<Var> leaves;
  leaves.reserve(batch.length);
  for (std::size_t t = 0; t < batch.length; ++t) {
    Tensor column(Shape{batch.size, vocab});
    for (std::size_t b = 0; b < batch.size; ++b) {
      const int id = batch.token(b, t);
      Require(id >= 0 && static_cast<std::size_t>(id) < vocab,
              "token id outside the vocabulary");
      column.at(b, static_cast<std::size_t>(id)) = requests[b].alpha;
    }
    leaves.push_back(tape.Leaf(std::move(column)));
  }
  const models::GraphOutput out =
      models::BuildForward(tape, model.config, params, batch, leaves);

  Tensor selector(Shape{batch.size, classes});
  for (std::size_t b = 0; b < batch.size; ++b) {
    const int label = requests[b].label;
    Require(label >= 0 && static_cast<std::size_t>(label) < classes,
            "label outside the class range");
    selector.at(b, static_cast<std::size_t>(label)) = 1.0;
  }
  const Tensor logits = out.logits.value();
  Var objective = grad::Sum(grad::Mul(out.logits, tape.Constant(selector)));
  const std::vector<Tensor> grads = tape.Backward(objective, leaves);

  std::vector<GradResult> results(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const std::size_t length = requests[b].obs->tokens.size();
    GradResult& r = results[b];
    r.gold_logit = logits.at(b, static_cast<std::size_t>(requests[b].label));
    r.gradient.resize(length * vocab);
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t v = 0; v < vocab; ++v) {
        const double g = grads[t].at(b, v);
        if (!std::isfinite(g)) {
          throw NumericFailure("non-finite importance gradient");
        }
        r.gradient[t * vocab + v] = g;
      }
    }
  }
  return results;
}

GradResult SingleGradient(const models::TrainedModel& model,
                          const data::Observation& obs, int label,
                          double alpha) {
  Require(!obs.tokens.empty(), "importance on an empty sequence");
  const GradRequest request{&obs, label, alpha};
  return OneHotGradients(model, std::span<const GradRequest>(&request, 1))
      .front();
}

std::vector<double> L2Rows(const std::vector<double>& gradient,
                           std::size_t length, std::size_t vocab) {
  std::vector<double> scores(length);
  for (std::size_t t = 0; t < length; ++t) {
    double sq = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      sq += gradient[t * vocab + v] * gradient[t * vocab + v];
    }
    scores[t] = std::sqrt(sq);
  }
  return scores;
}

std::vector<double> AtObserved(const std::vector<double>& gradient,
                               const data::Observation& obs,
                               std::size_t vocab) {
  std::vector<double> scores(obs.tokens.size());
  for (std::size_t t = 0; t < obs.tokens.size(); ++t) {
    scores[t] = gradient[t * vocab + static_cast<std::size_t>(obs.tokens[t])];
  }
  return scores;
}

void RequireAttention(const models::TrainedModel& model) {
  if (model.config.architecture == models::Architecture::kLinear) {
    throw UnsupportedMeasure("the linear model has no attention layer");
  }
}

}  // namespace

std::string_view MeasureName(Measure measure) {
  for (const auto& [m, name] : kMeasureNames) {
    if (m == measure) return name;
  }
  return "unknown";
}

Measure ParseMeasure(std::string_view name) {
  for (const auto& [m, n] : kMeasureNames) {
    if (n == name) return m;
  }
  throw ConfigError("unknown importance measure '" + std::string(name) + "'");
}

bool NeedsModel(Measure measure) {
  return measure != Measure::kRandom && measure != Measure::kOracle &&
         measure != Measure::kOracleFirst;
}

std::vector<double> AttentionImportance(const models::TrainedModel& model,
                                        const data::Observation& obs) {
  RequireAttention(model);
  const models::Prediction pred =
      obs.aux_tokens ? models::ForwardPaired(model, obs.tokens, *obs.aux_tokens)
                     : models::ForwardSingle(model, obs.tokens);
  return pred.attention;
}

std::vector<double> GradientImportance(const models::TrainedModel& model,
                                       const data::Observation& obs,
                                       int label) {
  const GradResult r = SingleGradient(model, obs, label, 1.0);
  return L2Rows(r.gradient, obs.tokens.size(), model.config.vocab_size);
}

std::vector<double> InputTimesGradient(const models::TrainedModel& model,
                                       const data::Observation& obs,
                                       int label) {
  const GradResult r = SingleGradient(model, obs, label, 1.0);
  return AtObserved(r.gradient, obs, model.config.vocab_size);
}

std::vector<double> IntegratedGradient(const models::TrainedModel& model,
                                       const data::Observation& obs, int label,
                                       std::size_t steps) {
  Require(steps >= 1, "integrated gradient needs k >= 1");
  Require(!obs.tokens.empty(), "importance on an empty sequence");
  const std::size_t vocab = model.config.vocab_size;
  std::vector<double> mean(obs.tokens.size(), 0.0);
  std::size_t seen = 0;
  std::vector<GradRequest> requests;
  for (std::size_t first = 1; first <= steps; first += kRowsPerTape) {
    const std::size_t last = std::min(steps, first + kRowsPerTape - 1);
    requests.clear();
    for (std::size_t i = first; i <= last; ++i) {
      requests.push_back({&obs, label,
                          static_cast<double>(i) / static_cast<double>(steps)});
    }
    for (const GradResult& r : OneHotGradients(model, requests)) {
      const std::vector<double> at = AtObserved(r.gradient, obs, vocab);
      ++seen;
      // Running mean: a path with a constant gradient returns it bit-exactly.
      for (std::size_t t = 0; t < mean.size(); ++t) {
        mean[t] += (at[t] - mean[t]) / static_cast<double>(seen);
      }
    }
  }
  // (x - 0) is 1 at the observed coordinate.
  return mean;
}

std::vector<double> RandomImportance(const data::Observation& obs,
                                     std::uint64_t seed, std::size_t iteration,
                                     std::size_t obs_id) {
  Rng rng(DeriveSeed({seed, HashLabel("random-importance"), iteration, obs_id}));
  const std::vector<bool> maskable = data::MaskablePositions(obs);
  std::vector<double> scores(obs.tokens.size(), 0.0);
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (maskable[t]) scores[t] = rng.Uniform();
  }
  return scores;
}

std::vector<double> OracleImportance(const data::Observation& obs) {
  if (!obs.evidence) {
    throw ConfigError("oracle measure needs evidence annotations");
  }
  std::vector<double> scores(obs.tokens.size(), 0.0);
  for (int pos : *obs.evidence) {
    Require(pos >= 0 && static_cast<std::size_t>(pos) < scores.size(),
            "evidence position outside the sequence");
    if (obs.tokens[static_cast<std::size_t>(pos)] != data::kMask) {
      scores[static_cast<std::size_t>(pos)] = 1.0;
    }
  }
  return scores;
}

std::vector<double> OracleFirstImportance(const data::Observation& obs) {
  if (!obs.evidence) {
    throw ConfigError("oracle measure needs evidence annotations");
  }
  std::vector<double> scores(obs.tokens.size(), 0.0);
  for (int pos : *obs.evidence) {
    Require(pos >= 0 && static_cast<std::size_t>(pos) < scores.size(),
            "evidence position outside the sequence");
    if (obs.tokens[static_cast<std::size_t>(pos)] != data::kMask) {
      scores[static_cast<std::size_t>(pos)] = 1.0;
      break;
    }
  }
  return scores;
}

std::vector<double> InputGradient(const models::TrainedModel& model,
                                  const data::Observation& obs, int label,
                                  double alpha) {
  return SingleGradient(model, obs, label, alpha).gradient;
}

double ScaledInputLogit(const models::TrainedModel& model,
                        const data::Observation& obs, int label,
                        double alpha) {
  return SingleGradient(model, obs, label, alpha).gold_logit;
}

std::vector<ImportanceMap> ComputeImportance(
    const models::TrainedModel* model, Measure measure,
    std::span<const data::Observation> observations,
    std::span<const std::size_t> obs_ids, const ImportanceOptions& options) {
  Require(observations.size() == obs_ids.size(),
          "one id per observation required");
  if (NeedsModel(measure)) Require(model != nullptr, "measure needs a model");
  if (measure == Measure::kAttention) RequireAttention(*model);
  if (measure == Measure::kIntegratedGradient) {
    Require(options.ig_steps >= 1, "integrated gradient needs k >= 1");
  }

  std::vector<ImportanceMap> maps(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const data::Observation& obs = observations[i];
    Require(!obs.tokens.empty(), "importance on an empty sequence");
    maps[i].obs_id = obs_ids[i];
    maps[i].measure = measure;
    maps[i].label = obs.label;
    maps[i].iteration = options.iteration;
    maps[i].maskable = data::MaskablePositions(obs);
  }

  switch (measure) {
    case Measure::kRandom:
      for (std::size_t i = 0; i < maps.size(); ++i) {
        maps[i].scores = RandomImportance(observations[i], options.seed,
                                          options.iteration, obs_ids[i]);
      }
      break;
    case Measure::kOracle:
      for (std::size_t i = 0; i < maps.size(); ++i) {
        maps[i].scores = OracleImportance(observations[i]);
      }
      break;
    case Measure::kOracleFirst:
      for (std::size_t i = 0; i < maps.size(); ++i) {
        maps[i].scores = OracleFirstImportance(observations[i]);
      }
      break;
    case Measure::kAttention: {
      for (std::size_t start = 0; start < observations.size();
           start += kRowsPerTape) {
        const std::size_t end =
            std::min(observations.size(), start + kRowsPerTape);
        const models::Batch batch =
            models::MakeBatch(observations.subspan(start, end - start));
        Tape tape;
        const models::BoundParameters params =
            models::BindParameters(tape, model->parameters, false);
        const Tensor alpha =
            models::BuildForward(tape, model->config, params, batch)
                .attention.value();
        for (std::size_t b = 0; b < batch.size; ++b) {
          auto& scores = maps[start + b].scores;
          scores.resize(observations[start + b].tokens.size());
          for (std::size_t t = 0; t < scores.size(); ++t) {
            scores[t] = alpha.at(b, t);
          }
        }
      }
      break;
    }
    case Measure::kGradient:
    case Measure::kInputTimesGradient: {
      const std::size_t vocab = model->config.vocab_size;
      std::vector<GradRequest> requests;
      for (std::size_t start = 0; start < observations.size();
           start += kRowsPerTape) {
        const std::size_t end =
            std::min(observations.size(), start + kRowsPerTape);
        requests.clear();
        for (std::size_t i = start; i < end; ++i) {
          requests.push_back({&observations[i], observations[i].label, 1.0});
        }
        const std::vector<GradResult> results =
            OneHotGradients(*model, requests);
        for (std::size_t i = start; i < end; ++i) {
          const data::Observation& obs = observations[i];
          maps[i].scores =
              measure == Measure::kGradient
                  ? L2Rows(results[i - start].gradient, obs.tokens.size(), vocab)
                  : AtObserved(results[i - start].gradient, obs, vocab);
        }
      }
      break;
    }
    case Measure::kIntegratedGradient:
      for (std::size_t i = 0; i < maps.size(); ++i) {
        maps[i].scores = IntegratedGradient(*model, observations[i],
                                            observations[i].label,
                                            options.ig_steps);
      }
      break;
  }
  return maps;
}

std::string MapsToJsonl(std::span<const ImportanceMap> maps) {
  std::string out;
  for (const ImportanceMap& m : maps) {
    nlohmann::ordered_json line;
    line["obs_id"] = m.obs_id;
    line["measure"] = MeasureName(m.measure);
    line["iteration"] = m.iteration;
    line["scores"] = m.scores;
    line["maskable"] = m.maskable;
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace roarbench::importance
