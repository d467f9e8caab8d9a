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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "roarbench/tensor.hpp"

namespace roarbench::grad {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Insertion-ordered collection of named parameter tensors.
class ParameterSet {
 public:
  void Add(std::string name, Tensor value);
  bool Contains(std::string_view name) const;
  Tensor& Get(std::string_view name);
  const Tensor& Get(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name ||
          a.entries_[i].value != b.entries_[i].value) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<NamedTensor> entries_;
};

inline constexpr int kCheckpointFormatVersion = 1;

// {"format_version": 1, "parameters": {name: {"shape": [...], "values": [...]}}}
nlohmann::ordered_json CheckpointToJson(const ParameterSet& params);
ParameterSet CheckpointFromJson(const nlohmann::ordered_json& doc);
void SaveCheckpoint(const ParameterSet& params,
                    const std::filesystem::path& path);
ParameterSet LoadCheckpoint(const std::filesystem::path& path);

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // L2 penalty folded into the gradient before the moment updates.
  double weight_decay = 1e-5;
  bool amsgrad = true;
};

// Adam with optional AMSGrad max-second-moment tracking.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const ParameterSet& params);

  // grads[i] corresponds to params.entries()[i].
  void Step(ParameterSet& params, std::span<const Tensor> grads);

  std::uint64_t step_count() const { return step_; }
  const OptimizerConfig& config() const { return config_; }
  const std::vector<Tensor>& max_second_moment() const { return vmax_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::vector<Tensor> vmax_;
  std::uint64_t step_ = 0;
};

}  // namespace roarbench::grad
