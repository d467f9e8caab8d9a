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

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every primitive applied during one forward pass. Each
// recorded node keeps its value and a closure that maps the node's adjoint
// onto the adjoints of its inputs. Backward() replays those closures in
// reverse record order exactly once; afterwards the tape is consumed.
//
// Binary elementwise ops accept operands of equal shape, or a second operand
// that broadcasts: a single value, a suffix of the first operand's shape
// (broadcast over leading dimensions), or a [rows x 1] column against a
// [rows x n] matrix.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "roarbench/tensor.hpp"

namespace roarbench::grad {

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct BackwardArgs {
  const Tensor& output;
  const Tensor& output_grad;
  std::span<const Tensor* const> inputs;
  // Null for inputs that do not require a gradient.
  std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (parameter or one-hot encoding).
  Var Leaf(Tensor value);
  // Input that never receives a gradient.
  Var Constant(Tensor value);

  // Records the result of a primitive. Throws NumericFailure naming `op` if
  // the result holds NaN or Inf.
  Var Record(std::string_view op, Tensor value, std::vector<Var> inputs,
             BackwardFn backward);

  // Accumulates adjoints from a scalar loss and returns d(loss)/d(leaf) for
  // every requested leaf, in order. Leaves not reachable from the loss get
  // zero gradients. Consumes the tape.
  std::vector<Tensor> Backward(Var loss, std::span<const Var> wrt);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string_view op;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  void CheckOwned(const Var& v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Primitive set. All functions record onto the tape owning their operands.
Var MatMul(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Scale(Var a, double factor);
Var Tanh(Var a);
Var Sigmoid(Var a);
Var Exp(Var a);
Var Log(Var a);
// Softmax over the last axis, computed with max subtraction.
Var Softmax(Var a);
// Softmax over the last axis restricted to entries whose mask value is
// nonzero; masked entries come out exactly 0 and pass no gradient. Every row
// needs at least one unmasked entry.
Var MaskedSoftmax(Var a, const Tensor& mask);
Var Concat(std::span<const Var> parts, std::size_t axis);
Var Slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var Sum(Var a);
Var Mean(Var a);
// Sum over one axis; the axis is removed from the result shape.
Var SumAxis(Var a, std::size_t axis);
// Euclidean norm over one axis; the axis is removed from the result shape.
// The gradient at a zero-norm slice is taken as zero.
Var L2Norm(Var a, std::size_t axis);
// Row gather: result[i] = table[ids[i]]. The adjoint is scattered back into
// the touched rows only.
Var Embedding(Var table, std::span<const int> ids);
// Mean over the batch of -log softmax(logits)[label].
Var CrossEntropyWithLogits(Var logits, std::span<const int> labels);

// Same values under a new shape with equal element count.
Var Reshape(Var a, Shape shape);
// 2-D transpose.
Var Transpose(Var a);
// Fused LSTM cell. `gates` is [B x 4H] pre-activations ordered (input,
// forget, candidate, output); `cell` is the previous [B x H] cell state.
// Returns [B x 2H] holding the new hidden state in columns [0, H) and the new
// cell state in columns [H, 2H).
Var LstmCell(Var gates, Var cell);

}  // namespace roarbench::grad
