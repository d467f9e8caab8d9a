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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "roarbench/autodiff.hpp"
#include "roarbench/errors.hpp"
#include "roarbench/optimizer.hpp"
#include "gradient_cases.hpp"
#include "test_util.hpp"

namespace roarbench::grad {
namespace {

using testing::MaxGradientError;
using testing::RandomShape;
using testing::RandomTensor;

constexpr int kInstances = 25;

class PrimitiveGradient : public ::testing::TestWithParam<testing::PrimitiveCase> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const testing::PrimitiveCase& c = GetParam();
  for (int instance = 0; instance < kInstances; ++instance) {
    Rng rng(DeriveSeed({HashLabel(c.name), static_cast<std::uint64_t>(instance)}));
    const std::vector<Tensor> inputs = c.inputs(rng);
    EXPECT_LT(MaxGradientError(c.loss, inputs), testing::kFdTolerance)
        << c.name << " instance " << instance;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient, ::testing::ValuesIn(testing::PrimitiveCases()),
                         [](const auto& info) { return info.param.name; });

TEST(ForwardOps, SoftmaxOfZerosIsUniform) {
  Tape tape;
  const Var y = Softmax(tape.Leaf(Tensor(Shape{3})));
  for (double v : y.value().values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(ForwardOps, TanhOfZeroIsZero) {
  Tape tape;
  EXPECT_EQ(Tanh(tape.Leaf(Tensor::Scalar(0.0))).value().item(), 0.0);
}

TEST(ForwardOps, IdentityMatMul) {
  Rng rng(4);
  Tensor eye(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  for (std::size_t k = 1; k <= 4; ++k) {
    Tape tape;
    const Tensor a = RandomTensor(rng, {3, k});
    EXPECT_EQ(MatMul(tape.Constant(eye), tape.Leaf(a)).value(), a);
  }
}

TEST(ForwardOps, SoftmaxRowsAreDistributions) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    const Var y = Softmax(tape.Leaf(RandomTensor(rng, RandomShape(rng, 2, 6), -30, 30)));
    const std::size_t n = y.shape().back();
    for (std::size_t r = 0; r < y.value().size() / n; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = y.value()[r * n + j];
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(ForwardOps, ShapeMismatchIsContractViolation) {
  Tape tape;
  const Var a = tape.Leaf(Tensor(Shape{2, 3}));
  const Var b = tape.Leaf(Tensor(Shape{2, 3}));
  EXPECT_THROW(MatMul(a, b), ContractViolation);
  EXPECT_THROW(Add(a, tape.Leaf(Tensor(Shape{3, 2}))), ContractViolation);
}

TEST(ForwardOps, NonFiniteResultIsNumericFailure) {
  Tape tape;
  EXPECT_THROW(Log(tape.Leaf(Tensor(Shape{2}, -1.0))), NumericFailure);
  EXPECT_THROW(Exp(tape.Leaf(Tensor(Shape{1}, 1000.0))), NumericFailure);
}

TEST(Backward, SumOfSquares) {
  Tape tape;
  const Var x = tape.Leaf(Tensor(Shape{2}, {1.0, 2.0}));
  const auto g = tape.Backward(Sum(Mul(x, x)), std::span(&x, 1));
  EXPECT_EQ(g[0], Tensor(Shape{2}, {2.0, 4.0}));
}

TEST(Backward, LinearGradientIsWeightExactly) {
  Rng rng(12);
  Tape tape;
  const Tensor w = RandomTensor(rng, {5});
  const Var x = tape.Leaf(RandomTensor(rng, {5}));
  const auto g = tape.Backward(Sum(Mul(tape.Constant(w), x)), std::span(&x, 1));
  EXPECT_EQ(g[0], w);
}

TEST(Backward, CrossEntropyOnRandomLogits) {
  Rng rng(21);
  const testing::LossBuilder loss = [](Tape&, std::span<const Var> x) {
    const int labels[] = {2, 0, 1, 1, 0};
    return CrossEntropyWithLogits(x[0], labels);
  };
  EXPECT_LT(MaxGradientError(loss, {RandomTensor(rng, {5, 3}, -3, 3)}), 1e-4);
}

TEST(Backward, ConsumedTapeIsUsageError) {
  Tape tape;
  const Var x = tape.Leaf(Tensor::Scalar(2.0));
  const Var y = Mul(x, x);
  tape.Backward(y, std::span(&x, 1));
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.Backward(y, std::span(&x, 1)), UsageError);
}

TEST(Backward, NonScalarLossIsContractViolation) {
  Tape tape;
  const Var x = tape.Leaf(Tensor(Shape{2}));
  EXPECT_THROW(tape.Backward(x, std::span(&x, 1)), ContractViolation);
}

TEST(Backward, ReplayIsBitIdentical) {
  const auto run = [] {
    Rng rng(5);
    Tape tape;
    const Var a = tape.Leaf(RandomTensor(rng, {4, 3}));
    const Var b = tape.Leaf(RandomTensor(rng, {3, 2}));
    const Var loss = Sum(Tanh(MatMul(a, b)));
    const Var leaves[] = {a, b};
    auto grads = tape.Backward(loss, leaves);
    grads.push_back(loss.value());
    return grads;
  };
  EXPECT_EQ(run(), run());
}

TEST(Optimizer, ZeroGradientWithoutDecayLeavesParams) {
  ParameterSet params;
  params.Add("w", Tensor(Shape{3}, {1.0, -2.0, 0.5}));
  const ParameterSet before = params;
  Optimizer opt({.learning_rate = 0.1, .weight_decay = 0.0}, params);
  const Tensor zero(Shape{3});
  for (int i = 0; i < 5; ++i) opt.Step(params, std::span(&zero, 1));
  EXPECT_EQ(params, before);
  EXPECT_EQ(opt.step_count(), 5u);
}

TEST(Optimizer, FirstAdamStepMovesByLearningRate) {
  for (bool amsgrad : {true, false}) {
    ParameterSet params;
    params.Add("w", Tensor::Scalar(0.0));
    Optimizer opt({.learning_rate = 0.001, .weight_decay = 0.0, .amsgrad = amsgrad}, params);
    const Tensor g = Tensor::Scalar(1.0);
    opt.Step(params, std::span(&g, 1));
    EXPECT_NEAR(params.Get("w").item(), -0.001, 1e-9);
  }
}

TEST(Optimizer, ConvergesOnQuadratic) {
  ParameterSet params;
  params.Add("w", Tensor::Scalar(0.0));
  Optimizer opt({.learning_rate = 0.1, .weight_decay = 0.0}, params);
  for (int i = 0; i < 100; ++i) {
    const Tensor g = Tensor::Scalar(2.0 * (params.Get("w").item() - 3.0));
    opt.Step(params, std::span(&g, 1));
  }
  EXPECT_LT(std::abs(params.Get("w").item() - 3.0), 0.05);
}

TEST(Optimizer, NonFiniteGradientIsNumericFailure) {
  ParameterSet params;
  params.Add("w", Tensor::Scalar(0.0));
  Optimizer opt({}, params);
  const Tensor g = Tensor::Scalar(std::nan(""));
  EXPECT_THROW(opt.Step(params, std::span(&g, 1)), NumericFailure);
}

TEST(Checkpoint, RoundTripsThroughJson) {
  Rng rng(3);
  ParameterSet params;
  params.Add("a", RandomTensor(rng, {2, 3}));
  params.Add("b", RandomTensor(rng, {4}));
  const auto doc = CheckpointToJson(params);
  EXPECT_EQ(doc["format_version"], 1);
  EXPECT_EQ(CheckpointFromJson(doc), params);

  const auto path = std::filesystem::temp_directory_path() / "roarbench_ckpt_test.json";
  SaveCheckpoint(params, path);
  EXPECT_EQ(LoadCheckpoint(path), params);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsWrongVersion) {
  ParameterSet params;
  params.Add("a", Tensor::Scalar(1.0));
  auto doc = CheckpointToJson(params);
  doc["format_version"] = 2;
  EXPECT_THROW(CheckpointFromJson(doc), ParseError);
}

}  // namespace
}  // namespace roarbench::grad
