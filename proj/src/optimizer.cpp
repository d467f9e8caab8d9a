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

#include "roarbench/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "roarbench/errors.hpp"

namespace roarbench::grad {

void ParameterSet::Add(std::string name, Tensor value) {
  Require(!Contains(name), "duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParameterSet::Contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const NamedTensor& e) { return e.name == name; });
}

Tensor& ParameterSet::Get(std::string_view name) {
  for (NamedTensor& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw ContractViolation("unknown parameter '" + std::string(name) + "'");
}

const Tensor& ParameterSet::Get(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->Get(name);
}

nlohmann::ordered_json CheckpointToJson(const ParameterSet& params) {
  nlohmann::ordered_json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  nlohmann::ordered_json& out = doc["parameters"];
  out = nlohmann::ordered_json::object();
  for (const NamedTensor& e : params.entries()) {
    out[e.name] = {{"shape", e.value.shape()}, {"values", e.value.storage()}};
  }
  return doc;
}

ParameterSet CheckpointFromJson(const nlohmann::ordered_json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw ParseError("unsupported checkpoint format_version " +
                       doc.at("format_version").dump());
    }
    ParameterSet params;
    for (const auto& [name, entry] : doc.at("parameters").items()) {
      params.Add(name, Tensor(entry.at("shape").get<Shape>(),
                              entry.at("values").get<std::vector<double>>()));
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const ParameterSet& params,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << CheckpointToJson(params).dump() << '\n';
}

ParameterSet LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return CheckpointFromJson(doc);
}

Optimizer::Optimizer(OptimizerConfig config, const ParameterSet& params)
    : config_(config) {
  for (const NamedTensor& e : params.entries()) {
    m_.emplace_back(e.value.shape());
    v_.emplace_back(e.value.shape());
    vmax_.emplace_back(e.value.shape());
  }
}

void Optimizer::Step(ParameterSet& params, std::span<const Tensor> grads) {
  auto& entries = params.entries();
  Require(entries.size() == grads.size() && entries.size() == m_.size(),
          "optimizer: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != entries[i].value.shape()) {
      throw ContractViolation("optimizer: gradient shape " +
                              ShapeString(grads[i].shape()) +
                              " for parameter '" + entries[i].name + "'");
    }
    if (!grads[i].AllFinite()) {
      throw NumericFailure("non-finite gradient for parameter '" +
                           entries[i].name + "'");
    }
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  const double step_size = config_.learning_rate / bias1;
  const double bias2_sqrt = std::sqrt(bias2);

  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor& p = entries[i].value;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    Tensor& vmax = vmax_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grads[i][j] + config_.weight_decay * p[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      double second = v[j];
      if (config_.amsgrad) {
        vmax[j] = std::max(vmax[j], v[j]);
        second = vmax[j];
      }
      const double denom = std::sqrt(second) / bias2_sqrt + config_.epsilon;
      p[j] -= step_size * m[j] / denom;
    }
  }
}

}  // namespace roarbench::grad
