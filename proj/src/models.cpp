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

#include "roarbench/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "roarbench/errors.hpp"
#include "roarbench/rng.hpp"

namespace roarbench::models {

using grad::ParameterSet;
using grad::Shape;
using grad::Tape;
using grad::Tensor;
using grad::Var;

std::string_view ArchitectureName(Architecture arch) {
  switch (arch) {
    case Architecture::kLinear:
      return "linear";
    case Architecture::kBiLstmAttentionSingle:
      return "bilstm-attention-single";
    case Architecture::kBiLstmAttentionPaired:
      return "bilstm-attention-paired";
  }
  return "unknown";
}

Architecture ParseArchitecture(std::string_view name) {
  if (name == "linear") return Architecture::kLinear;
  if (name == "bilstm-attention-single") {
    return Architecture::kBiLstmAttentionSingle;
  }
  if (name == "bilstm-attention-paired") {
    return Architecture::kBiLstmAttentionPaired;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

void ValidateConfig(const ModelConfig& config) {
  if (config.vocab_size < static_cast<std::size_t>(data::kNumReserved)) {
    throw ConfigError("vocab_size must cover the reserved tokens");
  }
  if (config.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (config.architecture != Architecture::kLinear &&
      (config.embedding_size < 1 || config.hidden_size < 1)) {
    throw ConfigError("embedding_size and hidden_size must be >= 1");
  }
  if (!(config.optimizer.learning_rate > 0.0)) {
    throw ConfigError("learning_rate must be positive");
  }
}

nlohmann::ordered_json ConfigToJson(const ModelConfig& config) {
  return {{"architecture", ArchitectureName(config.architecture)},
          {"vocab_size", config.vocab_size},
          {"embedding_size", config.embedding_size},
          {"hidden_size", config.hidden_size},
          {"num_classes", config.num_classes},
          {"max_epochs", config.max_epochs},
          {"batch_size", config.batch_size},
          {"seed", config.seed},
          {"learning_rate", config.optimizer.learning_rate},
          {"beta1", config.optimizer.beta1},
          {"beta2", config.optimizer.beta2},
          {"epsilon", config.optimizer.epsilon},
          {"weight_decay", config.optimizer.weight_decay},
          {"amsgrad", config.optimizer.amsgrad}};
}

ModelConfig ConfigFromJson(const nlohmann::ordered_json& doc) {
  ModelConfig c;
  try {
    c.architecture = ParseArchitecture(doc.at("architecture").get<std::string>());
    c.vocab_size = doc.at("vocab_size").get<std::size_t>();
    c.embedding_size = doc.at("embedding_size").get<std::size_t>();
    c.hidden_size = doc.at("hidden_size").get<std::size_t>();
    c.num_classes = doc.at("num_classes").get<std::size_t>();
    c.max_epochs = doc.at("max_epochs").get<std::size_t>();
    c.batch_size = doc.at("batch_size").get<std::size_t>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.optimizer.learning_rate = doc.at("learning_rate").get<double>();
    c.optimizer.beta1 = doc.at("beta1").get<double>();
    c.optimizer.beta2 = doc.at("beta2").get<double>();
    c.optimizer.epsilon = doc.at("epsilon").get<double>();
    c.optimizer.weight_decay = doc.at("weight_decay").get<double>();
    c.optimizer.amsgrad = doc.at("amsgrad").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  return c;
}

std::string HistoryCsv(const TrainedModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_loss\n";
  for (const EpochRecord& r : model.history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.validation_loss << '\n';
  }
  return out.str();
}

namespace {

Tensor Uniform(Rng& rng, Shape shape, double bound) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.Uniform(-bound, bound);
  return t;
}

void AddEncoder(ParameterSet& params, Rng& rng, const std::string& prefix,
                std::size_t input, std::size_t hidden) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (const char* dir : {".fwd", ".bwd"}) {
    params.Add(prefix + dir + ".w_ih", Uniform(rng, {input, 4 * hidden}, k));
    params.Add(prefix + dir + ".w_hh", Uniform(rng, {hidden, 4 * hidden}, k));
    Tensor bias = Uniform(rng, {4 * hidden}, k);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;
    params.Add(prefix + dir + ".bias", std::move(bias));
  }
}

}  // namespace

ParameterSet InitParameters(const ModelConfig& config, std::uint64_t seed) {
  ValidateConfig(config);
  Rng rng(DeriveSeed({seed, HashLabel("init")}));
  ParameterSet params;
  const std::size_t v = config.vocab_size, c = config.num_classes;
  if (config.architecture == Architecture::kLinear) {
    const double k = 1.0 / std::sqrt(static_cast<double>(v));
    params.Add("weight", Uniform(rng, {v, c}, k));
    params.Add("bias", Tensor(Shape{c}));
    return params;
  }

  const std::size_t d = config.embedding_size, h = config.hidden_size;
  const std::size_t att = h;
  Tensor embedding(Shape{v, d});
  for (double& x : embedding.values()) x = rng.Normal();
  params.Add("embedding", std::move(embedding));

  const double k2h = 1.0 / std::sqrt(static_cast<double>(2 * h));
  const double katt = 1.0 / std::sqrt(static_cast<double>(att));
  if (config.architecture == Architecture::kBiLstmAttentionSingle) {
    AddEncoder(params, rng, "encoder", d, h);
    params.Add("attention.weight", Uniform(rng, {2 * h, att}, k2h));
    params.Add("attention.bias", Uniform(rng, {att}, k2h));
  } else {
    AddEncoder(params, rng, "encoder_x", d, h);
    AddEncoder(params, rng, "encoder_y", d, h);
    params.Add("attention.weight_x", Uniform(rng, {2 * h, att}, k2h));
    params.Add("attention.weight_y", Uniform(rng, {2 * h, att}, k2h));
  }
  params.Add("attention.vector", Uniform(rng, {att, 1}, katt));
  params.Add("output.weight", Uniform(rng, {2 * h, c}, k2h));
  params.Add("output.bias", Uniform(rng, {c}, k2h));
  return params;
}

Batch MakeBatch(std::span<const data::Observation* const> observations) {
  Require(!observations.empty(), "empty batch");
  Batch batch;
  batch.size = observations.size();
  bool paired = observations.front()->aux_tokens.has_value();
  for (const data::Observation* obs : observations) {
    Require(!obs->tokens.empty(), "empty sequence");
    Require(obs->aux_tokens.has_value() == paired,
            "batch mixes single and paired observations");
    batch.length = std::max(batch.length, obs->tokens.size());
    if (paired) {
      Require(!obs->aux_tokens->empty(), "empty auxiliary sequence");
      batch.aux_length = std::max(batch.aux_length, obs->aux_tokens->size());
    }
  }
  batch.tokens.assign(batch.size * batch.length, data::kPad);
  batch.aux_tokens.assign(batch.size * batch.aux_length, data::kPad);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const data::Observation& obs = *observations[b];
    std::copy(obs.tokens.begin(), obs.tokens.end(),
              batch.tokens.begin() + static_cast<long>(b * batch.length));
    if (paired) {
      std::copy(obs.aux_tokens->begin(), obs.aux_tokens->end(),
                batch.aux_tokens.begin() +
                    static_cast<long>(b * batch.aux_length));
    }
    batch.labels.push_back(obs.label);
  }
  return batch;
}

Batch MakeBatch(std::span<const data::Observation> observations) {
  std::vector<const data::Observation*> ptrs;
  ptrs.reserve(observations.size());
  for (const auto& obs : observations) ptrs.push_back(&obs);
  return MakeBatch(ptrs);
}

Var BoundParameters::Get(std::string_view name) const {
  const auto& entries = source->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return vars[i];
  }
  throw ContractViolation("model has no parameter '" + std::string(name) + "'");
}

BoundParameters BindParameters(Tape& tape, const ParameterSet& params,
                               bool trainable) {
  BoundParameters bound;
  bound.source = &params;
  for (const auto& e : params.entries()) {
    bound.vars.push_back(trainable ? tape.Leaf(e.value)
                                   : tape.Constant(e.value));
  }
  return bound;
}

Tensor OneHotColumn(const Batch& batch, std::size_t t, std::size_t vocab_size,
                    double scale) {
  Tensor out(Shape{batch.size, vocab_size});
  for (std::size_t b = 0; b < batch.size; ++b) {
    out.at(b, static_cast<std::size_t>(batch.token(b, t))) = scale;
  }
  return out;
}

namespace {

// Token ids in time-major order: row t * B + b.
std::vector<int> TimeMajor(const std::vector<int>& tokens, std::size_t size,
                           std::size_t length) {
  std::vector<int> out(tokens.size());
  for (std::size_t b = 0; b < size; ++b) {
    for (std::size_t t = 0; t < length; ++t) {
      out[t * size + b] = tokens[b * length + t];
    }
  }
  return out;
}

struct Encoded {
  Var states;  // [(T*B) x 2H], time-major
  Var final;   // [B x 2H]: last forward state, last backward state
};

Encoded EncodeBiLstm(Tape& tape, const BoundParameters& params,
                     const std::string& prefix, Var inputs, std::size_t length,
                     std::size_t size, std::size_t hidden,
                     const std::vector<int>& time_major_tokens) {
  std::vector<Var> finals;
  std::vector<Var> per_direction;
  for (const bool forward : {true, false}) {
    const std::string p = prefix + (forward ? ".fwd" : ".bwd");
    Var projected =
        grad::Add(grad::MatMul(inputs, params.Get(p + ".w_ih")),
                  params.Get(p + ".bias"));
    Var w_hh = params.Get(p + ".w_hh");
    Var h = tape.Constant(Tensor(Shape{size, hidden}));
    Var c = tape.Constant(Tensor(Shape{size, hidden}));
    std::vector<Var> outputs(length);
    for (std::size_t step = 0; step < length; ++step) {
      const std::size_t t = forward ? step : length - 1 - step;
      Var gates = grad::Add(grad::Slice(projected, 0, t * size, (t + 1) * size),
                            grad::MatMul(h, w_hh));
      Var hc = grad::LstmCell(gates, c);
      Var h_new = grad::Slice(hc, 1, 0, hidden);
      Var c_new = grad::Slice(hc, 1, hidden, 2 * hidden);

      Tensor keep(Shape{size, 1});
      bool any_pad = false;
      for (std::size_t b = 0; b < size; ++b) {
        const bool real = time_major_tokens[t * size + b] != data::kPad;
        keep[b] = real ? 1.0 : 0.0;
        any_pad = any_pad || !real;
      }
      if (any_pad) {
        // Padded steps carry the previous state through unchanged.
        Var m = tape.Constant(std::move(keep));
        h = grad::Add(h, grad::Mul(grad::Sub(h_new, h), m));
        c = grad::Add(c, grad::Mul(grad::Sub(c_new, c), m));
      } else {
        h = h_new;
        c = c_new;
      }
      outputs[t] = h;
    }
    finals.push_back(h);
    per_direction.push_back(grad::Concat(outputs, 0));
  }
  return {grad::Concat(per_direction, 1), grad::Concat(finals, 1)};
}

}  // namespace

GraphOutput BuildForward(Tape& tape, const ModelConfig& config,
                         const BoundParameters& params, const Batch& batch,
                         std::span<const Var> one_hot) {
  const std::size_t size = batch.size, length = batch.length;
  Require(size > 0 && length > 0, "forward on an empty batch");
  if (!one_hot.empty()) {
    Require(one_hot.size() == length,
            "one-hot input needs one encoding per position");
  }
  const bool paired =
      config.architecture == Architecture::kBiLstmAttentionPaired;
  if (paired) {
    Require(batch.aux_length > 0, "paired model needs an auxiliary sequence");
  }
  const std::vector<int> ids = TimeMajor(batch.tokens, size, length);

  if (config.architecture == Architecture::kLinear) {
    Var weight = params.Get("weight");
    Var contributions =
        one_hot.empty() ? grad::Embedding(weight, ids)
                        : grad::MatMul(grad::Concat(one_hot, 0), weight);
    if (std::find(ids.begin(), ids.end(), data::kPad) != ids.end()) {
      Tensor keep(Shape{ids.size(), 1});
      for (std::size_t i = 0; i < ids.size(); ++i) {
        keep[i] = ids[i] == data::kPad ? 0.0 : 1.0;
      }
      contributions = grad::Mul(contributions, tape.Constant(std::move(keep)));
    }
    Var summed = grad::SumAxis(
        grad::Reshape(contributions, {length, size, config.num_classes}), 0);
    return {grad::Add(summed, params.Get("bias")), Var()};
  }

  const std::size_t hidden = config.hidden_size;
  Var embedding = params.Get("embedding");
  Var inputs = one_hot.empty()
                   ? grad::Embedding(embedding, ids)
                   : grad::MatMul(grad::Concat(one_hot, 0), embedding);
  const Encoded x = EncodeBiLstm(tape, params, paired ? "encoder_x" : "encoder",
                                 inputs, length, size, hidden, ids);

  Var projected;
  if (paired) {
    const std::vector<int> aux_ids =
        TimeMajor(batch.aux_tokens, size, batch.aux_length);
    const Encoded y =
        EncodeBiLstm(tape, params, "encoder_y",
                     grad::Embedding(embedding, aux_ids), batch.aux_length,
                     size, hidden, aux_ids);
    Var px = grad::MatMul(x.states, params.Get("attention.weight_x"));
    const std::size_t att = px.shape()[1];
    Var query = grad::MatMul(y.final, params.Get("attention.weight_y"));
    projected = grad::Reshape(
        grad::Add(grad::Reshape(px, {length, size, att}), query),
        {length * size, att});
  } else {
    projected = grad::Add(grad::MatMul(x.states, params.Get("attention.weight")),
                          params.Get("attention.bias"));
  }
  Var scores = grad::MatMul(grad::Tanh(projected), params.Get("attention.vector"));
  scores = grad::Transpose(grad::Reshape(scores, {length, size}));

  Tensor attendable(Shape{size, length});
  for (std::size_t b = 0; b < size; ++b) {
    for (std::size_t t = 0; t < length; ++t) {
      attendable.at(b, t) = data::IsStructural(batch.token(b, t)) ? 0.0 : 1.0;
    }
  }
  Var alpha = grad::MaskedSoftmax(scores, attendable);
  Var weights = grad::Reshape(grad::Transpose(alpha), {length * size, 1});
  Var context = grad::SumAxis(
      grad::Reshape(grad::Mul(x.states, weights), {length, size, 2 * hidden}),
      0);
  Var logits = grad::Add(grad::MatMul(context, params.Get("output.weight")),
                         params.Get("output.bias"));
  return {logits, alpha};
}

namespace {

Prediction ForwardOne(const TrainedModel& model, const data::Observation& obs) {
  Tape tape;
  const data::Observation* ptr = &obs;
  const Batch batch = MakeBatch(std::span<const data::Observation* const>(&ptr, 1));
  const BoundParameters params = BindParameters(tape, model.parameters, false);
  const GraphOutput out = BuildForward(tape, model.config, params, batch);
  Prediction pred;
  const auto& logits = out.logits.value().storage();
  pred.logits.assign(logits.begin(), logits.end());
  if (out.attention.valid()) {
    const auto& alpha = out.attention.value().storage();
    pred.attention.assign(alpha.begin(), alpha.end());
  }
  return pred;
}

}  // namespace

Prediction ForwardSingle(const TrainedModel& model,
                         std::span<const int> tokens) {
  Require(!tokens.empty(), "forward on an empty sequence");
  Require(model.config.architecture != Architecture::kBiLstmAttentionPaired,
          "paired model needs an auxiliary sequence");
  data::Observation obs;
  obs.tokens.assign(tokens.begin(), tokens.end());
  return ForwardOne(model, obs);
}

Prediction ForwardPaired(const TrainedModel& model,
                         std::span<const int> tokens,
                         std::span<const int> aux_tokens) {
  Require(!tokens.empty() && !aux_tokens.empty(),
          "forward on an empty sequence");
  Require(model.config.architecture == Architecture::kBiLstmAttentionPaired,
          "model is not a paired-sequence model");
  data::Observation obs;
  obs.tokens.assign(tokens.begin(), tokens.end());
  obs.aux_tokens = std::vector<int>(aux_tokens.begin(), aux_tokens.end());
  return ForwardOne(model, obs);
}

namespace {

constexpr std::size_t kInferenceBatch = 256;

template <typename Fn>
void ForEachBatch(std::span<const data::Observation> observations,
                  std::size_t batch_size, Fn&& fn) {
  std::vector<const data::Observation*> ptrs;
  for (std::size_t start = 0; start < observations.size();
       start += batch_size) {
    const std::size_t end = std::min(observations.size(), start + batch_size);
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&observations[i]);
    fn(start, MakeBatch(ptrs));
  }
}

}  // namespace

std::vector<std::vector<double>> PredictLogits(
    const TrainedModel& model,
    std::span<const data::Observation> observations) {
  std::vector<std::vector<double>> out(observations.size());
  ForEachBatch(observations, kInferenceBatch,
               [&](std::size_t start, const Batch& batch) {
                 Tape tape;
                 const BoundParameters params =
                     BindParameters(tape, model.parameters, false);
                 const Tensor& logits =
                     BuildForward(tape, model.config, params, batch)
                         .logits.value();
                 const std::size_t c = logits.dim(1);
                 for (std::size_t b = 0; b < batch.size; ++b) {
                   out[start + b].assign(logits.values().begin() + static_cast<long>(b * c),
                                         logits.values().begin() + static_cast<long>((b + 1) * c));
                 }
               });
  return out;
}

std::vector<int> Predict(const TrainedModel& model,
                         std::span<const data::Observation> observations) {
  std::vector<int> out;
  out.reserve(observations.size());
  for (const auto& logits : PredictLogits(model, observations)) {
    out.push_back(static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin()));
  }
  return out;
}

double MeanLoss(const ModelConfig& config, const ParameterSet& params,
                std::span<const data::Observation> observations) {
  Require(!observations.empty(), "loss over an empty split");
  double total = 0.0;
  ForEachBatch(observations, kInferenceBatch,
               [&](std::size_t, const Batch& batch) {
                 Tape tape;
                 const BoundParameters bound =
                     BindParameters(tape, params, false);
                 Var loss = grad::CrossEntropyWithLogits(
                     BuildForward(tape, config, bound, batch).logits,
                     batch.labels);
                 total += loss.value().item() * static_cast<double>(batch.size);
               });
  return total / static_cast<double>(observations.size());
}

TrainedModel Train(const ModelConfig& config,
                   std::span<const data::Observation> train,
                   std::span<const data::Observation> validation,
                   std::uint64_t seed) {
  ValidateConfig(config);
  Require(!train.empty(), "training split is empty");
  Require(!validation.empty(), "validation split is empty");

  TrainedModel model;
  model.config = config;
  model.config.seed = seed;
  ParameterSet params = InitParameters(config, seed);
  grad::Optimizer optimizer(config.optimizer, params);
  Rng shuffle(DeriveSeed({seed, HashLabel("shuffle")}));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const data::Observation*> ptrs;
  double best_loss = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle.Shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      ptrs.clear();
      for (std::size_t i = start; i < end; ++i) ptrs.push_back(&train[order[i]]);
      const Batch batch = MakeBatch(ptrs);

      Tape tape;
      const BoundParameters bound = BindParameters(tape, params, true);
      Var loss = grad::CrossEntropyWithLogits(
          BuildForward(tape, config, bound, batch).logits, batch.labels);
      epoch_loss += loss.value().item() * static_cast<double>(batch.size);
      const std::vector<Tensor> grads = tape.Backward(loss, bound.vars);
      optimizer.Step(params, grads);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(train.size());
    record.validation_loss = MeanLoss(config, params, validation);
    model.history.push_back(record);
    if (record.validation_loss < best_loss) {
      best_loss = record.validation_loss;
      model.parameters = params;
      model.best_epoch = epoch;
    }
  }
  return model;
}

double Evaluate(const TrainedModel& model,
                std::span<const data::Observation> observations,
                metrics::MetricKind metric) {
  Require(!observations.empty(), "evaluation split is empty");
  const std::vector<int> predictions = Predict(model, observations);
  std::vector<int> golds;
  golds.reserve(observations.size());
  for (const auto& obs : observations) golds.push_back(obs.label);
  return metrics::ClassificationMetric(predictions, golds,
                                       model.config.num_classes, metric);
}

int LogisticModel::Predict(
    const std::array<double, data::kTabularFeatures>& x) const {
  double z = bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
  return z > 0.0 ? 1 : 0;
}

LogisticModel FitLogistic(const data::TabularSplit& train, double l2_penalty) {
  Require(train.size() > 0, "logistic fit on an empty split");
  constexpr std::size_t kDim = data::kTabularFeatures + 1;
  const std::size_t n = train.size();
  Eigen::MatrixXd x(n, kDim);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < data::kTabularFeatures; ++j) {
      x(static_cast<long>(i), static_cast<long>(j)) = train.features[i][j];
    }
    x(static_cast<long>(i), kDim - 1) = 1.0;
    y(static_cast<long>(i)) = train.labels[i];
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(kDim, l2_penalty);
  penalty(kDim - 1) = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = x * w;
    double total = 0.0;
    for (long i = 0; i < z.size(); ++i) {
      // log(1 + exp(z)) - y z, evaluated stably.
      const double zi = z(i);
      total += (zi > 0.0 ? zi + std::log1p(std::exp(-zi))
                         : std::log1p(std::exp(zi))) -
               y(i) * zi;
    }
    return total * inv_n + 0.5 * w.cwiseProduct(penalty).dot(w);
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(kDim);
  double current = objective(w);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd z = x * w;
    Eigen::VectorXd p(n), s(n);
    for (long i = 0; i < z.size(); ++i) {
      p(i) = 1.0 / (1.0 + std::exp(-z(i)));
      s(i) = p(i) * (1.0 - p(i));
    }
    const Eigen::VectorXd gradient =
        inv_n * (x.transpose() * (p - y)) + penalty.cwiseProduct(w);
    Eigen::MatrixXd hessian = inv_n * (x.transpose() * s.asDiagonal() * x);
    hessian.diagonal() += penalty;
    hessian.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hessian.ldlt().solve(gradient);

    double scale = 1.0;
    Eigen::VectorXd next = w - step;
    double value = objective(next);
    while (value > current && scale > 1e-8) {
      scale *= 0.5;
      next = w - scale * step;
      value = objective(next);
    }
    const double moved = (next - w).norm();
    w = next;
    current = value;
    if (moved < 1e-10) break;
  }
  if (!w.allFinite()) throw NumericFailure("logistic regression diverged");

  LogisticModel model;
  for (std::size_t j = 0; j < data::kTabularFeatures; ++j) {
    model.weights[j] = w(static_cast<long>(j));
  }
  model.bias = w(kDim - 1);
  return model;
}

double LogisticAccuracy(const LogisticModel& model,
                        const data::TabularSplit& split) {
  Require(split.size() > 0, "accuracy on an empty split");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (model.Predict(split.features[i]) == split.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace roarbench::models
