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

#include "roarbench/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "roarbench/errors.hpp"

namespace roarbench::grad {

const Tensor& Var::value() const {
  Require(tape_ != nullptr, "use of an unbound Var");
  return tape_->value(id_);
}

void Tape::CheckOwned(const Var& v) const {
  if (v.tape() != this) {
    throw UsageError("operand recorded on a different tape");
  }
}

Var Tape::Leaf(Tensor value) {
  if (consumed_) throw UsageError("tape already consumed by backward");
  if (!value.AllFinite()) throw NumericFailure("non-finite leaf value");
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.is_leaf = true;
  node.op = "leaf";
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Constant(Tensor value) {
  if (consumed_) throw UsageError("tape already consumed by backward");
  Node node;
  node.value = std::move(value);
  node.op = "constant";
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(std::string_view op, Tensor value, std::vector<Var> inputs,
                 BackwardFn backward) {
  if (consumed_) throw UsageError("tape already consumed by backward");
  if (!value.AllFinite()) {
    throw NumericFailure("non-finite result in op '" + std::string(op) + "'");
  }
  Node node;
  node.value = std::move(value);
  node.op = op;
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    CheckOwned(v);
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::vector<Tensor> Tape::Backward(Var loss, std::span<const Var> wrt) {
  if (consumed_) throw UsageError("backward on a consumed tape");
  CheckOwned(loss);
  const Tensor& loss_value = nodes_[loss.id()].value;
  if (loss_value.size() != 1) {
    throw ContractViolation("backward needs a scalar loss, got shape " +
                            ShapeString(loss_value.shape()));
  }
  consumed_ = true;

  std::vector<Tensor> grads(nodes_.size(), Tensor(Shape{0}));
  std::vector<bool> has_grad(nodes_.size(), false);
  auto ensure = [&](std::size_t id) -> Tensor* {
    if (!nodes_[id].requires_grad) return nullptr;
    if (!has_grad[id]) {
      grads[id] = Tensor(nodes_[id].value.shape());
      has_grad[id] = true;
    }
    return &grads[id];
  };

  if (Tensor* g = ensure(loss.id())) g->Fill(1.0);

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!has_grad[id] || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      in_grads.push_back(ensure(in));
    }
    node.backward(BackwardArgs{node.value, grads[id], in_values, in_grads});
    if (!grads[id].AllFinite()) {
      throw NumericFailure("non-finite adjoint in op '" +
                           std::string(node.op) + "'");
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) {
    CheckOwned(v);
    if (has_grad[v.id()]) {
      out.push_back(std::move(grads[v.id()]));
      has_grad[v.id()] = false;
    } else {
      out.emplace_back(nodes_[v.id()].value.shape());
    }
  }
  for (const Tensor& g : out) {
    if (!g.AllFinite()) throw NumericFailure("non-finite gradient");
  }
  return out;
}

namespace {

Tape& TapeOf(const Var& a) {
  Require(a.valid(), "operation on an unbound Var");
  return *a.tape();
}

enum class Broadcast { kSame, kScalar, kLeading, kColumn };

Broadcast ResolveBroadcast(const Shape& a, const Shape& b,
                           std::string_view op) {
  if (a == b) return Broadcast::kSame;
  if (NumElements(b) == 1) return Broadcast::kScalar;
  if (b.size() < a.size() &&
      std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size()))) {
    return Broadcast::kLeading;
  }
  if (a.size() == 2 && b.size() == 2 && b[0] == a[0] && b[1] == 1) {
    return Broadcast::kColumn;
  }
  throw ContractViolation(std::string(op) + ": shapes " + ShapeString(a) +
                          " and " + ShapeString(b) + " do not conform");
}

// Maps an index into the first operand to the matching index of the second.
struct BroadcastIndex {
  Broadcast kind;
  std::size_t b_size;
  std::size_t cols;

  std::size_t operator()(std::size_t i) const {
    switch (kind) {
      case Broadcast::kSame:
        return i;
      case Broadcast::kScalar:
        return 0;
      case Broadcast::kLeading:
        return i % b_size;
      case Broadcast::kColumn:
        return i / cols;
    }
    return i;
  }
};

template <typename Forward, typename GradA, typename GradB>
Var Binary(std::string_view op, Var a, Var b, Forward forward, GradA grad_a,
           GradB grad_b) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = ResolveBroadcast(av.shape(), bv.shape(), op);
  const BroadcastIndex index{kind, bv.size(),
                             av.rank() == 2 ? av.dim(1) : std::size_t{1}};
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = forward(av[i], bv[index(i)]);
  }
  return tape.Record(
      op, std::move(out), {a, b},
      [index, grad_a, grad_b](const BackwardArgs& args) {
        const Tensor& x = *args.inputs[0];
        const Tensor& y = *args.inputs[1];
        const Tensor& g = args.output_grad;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const std::size_t j = index(i);
          if (args.input_grads[0]) {
            (*args.input_grads[0])[i] += g[i] * grad_a(x[i], y[j]);
          }
          if (args.input_grads[1]) {
            (*args.input_grads[1])[j] += g[i] * grad_b(x[i], y[j]);
          }
        }
      });
}

template <typename Forward, typename Derivative>
Var Unary(std::string_view op, Var a, Forward forward, Derivative derivative) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = forward(av[i]);
  return tape.Record(op, std::move(out), {a},
                     [derivative](const BackwardArgs& args) {
                       const Tensor& x = *args.inputs[0];
                       const Tensor& y = args.output;
                       Tensor& gx = *args.input_grads[0];
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         gx[i] += args.output_grad[i] * derivative(x[i], y[i]);
                       }
                     });
}

// Splits a shape around `axis` into (outer, axis length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis, std::string_view op) {
  if (axis >= shape.size()) {
    throw ContractViolation(std::string(op) + ": axis " +
                            std::to_string(axis) + " out of range for " +
                            ShapeString(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape WithoutAxis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

}  // namespace

Var MatMul(Var a, Var b) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ContractViolation("matmul: shapes " + ShapeString(av.shape()) +
                            " and " + ShapeString(bv.shape()) +
                            " do not conform");
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return tape.Record(
      "matmul", std::move(out), {a, b}, [m, k, n](const BackwardArgs& args) {
        const Tensor& x = *args.inputs[0];
        const Tensor& y = *args.inputs[1];
        const Tensor& g = args.output_grad;
        if (Tensor* gx = args.input_grads[0]) {
          // dX = G * Y^T
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              const double* grow = &g[i * n];
              const double* yrow = &y[p * n];
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * yrow[j];
              (*gx)[i * k + p] += acc;
            }
          }
        }
        if (Tensor* gy = args.input_grads[1]) {
          // dY = X^T * G
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = &g[i * n];
            for (std::size_t p = 0; p < k; ++p) {
              const double xip = x[i * k + p];
              if (xip == 0.0) continue;
              double* gyrow = &(*gy)[p * n];
              for (std::size_t j = 0; j < n; ++j) gyrow[j] += xip * grow[j];
            }
          }
        }
      });
}

Var Add(Var a, Var b) {
  return Binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var Sub(Var a, Var b) {
  return Binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var Mul(Var a, Var b) {
  return Binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var Scale(Var a, double factor) {
  return Unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var Tanh(Var a) {
  return Unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Sigmoid(Var a) {
  return Unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Exp(Var a) {
  return Unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var Log(Var a) {
  return Unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

namespace {

Var SoftmaxImpl(std::string_view op, Var a, const Tensor* mask) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  if (av.rank() == 0) throw ContractViolation("softmax of a rank-0 tensor");
  if (mask && mask->shape() != av.shape()) {
    throw ContractViolation("masked softmax: mask shape " +
                            ShapeString(mask->shape()) + " differs from " +
                            ShapeString(av.shape()));
  }
  const std::size_t n = av.shape().back();
  const std::size_t rows = n == 0 ? 0 : av.size() / n;
  Tensor out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    double max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && (*mask)[base + j] == 0.0) continue;
      max = std::max(max, av[base + j]);
    }
    if (max == -std::numeric_limits<double>::infinity()) {
      throw ContractViolation(std::string(op) + ": row " + std::to_string(r) +
                              " has no unmasked entry");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && (*mask)[base + j] == 0.0) continue;
      out[base + j] = std::exp(av[base + j] - max);
      total += out[base + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[base + j] /= total;
  }
  return tape.Record(op, std::move(out), {a},
                     [n, rows](const BackwardArgs& args) {
                       const Tensor& y = args.output;
                       const Tensor& g = args.output_grad;
                       Tensor& gx = *args.input_grads[0];
                       for (std::size_t r = 0; r < rows; ++r) {
                         const std::size_t base = r * n;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           dot += g[base + j] * y[base + j];
                         }
                         // Masked entries have y == 0 and receive nothing.
                         for (std::size_t j = 0; j < n; ++j) {
                           gx[base + j] += y[base + j] * (g[base + j] - dot);
                         }
                       }
                     });
}

}  // namespace

Var Softmax(Var a) { return SoftmaxImpl("softmax", a, nullptr); }

Var MaskedSoftmax(Var a, const Tensor& mask) {
  return SoftmaxImpl("masked_softmax", a, &mask);
}

Var Concat(std::span<const Var> parts, std::size_t axis) {
  Require(!parts.empty(), "concat of zero tensors");
  Tape& tape = TapeOf(parts[0]);
  const Shape& first = parts[0].shape();
  const AxisSplit split0 = SplitAt(first, axis, "concat");
  std::vector<std::size_t> lengths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw ContractViolation("concat: shape " + ShapeString(s) +
                              " does not conform to " + ShapeString(first));
    }
    lengths.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  Tensor out(out_shape);
  const std::size_t outer = split0.outer, inner = split0.inner;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    const std::size_t len = lengths[p];
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(&v[o * len * inner], len * inner,
                  &out[(o * total + offset) * inner]);
    }
    offset += len;
  }
  return tape.Record(
      "concat", std::move(out), std::vector<Var>(parts.begin(), parts.end()),
      [lengths, total, outer, inner](const BackwardArgs& args) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < lengths.size(); ++p) {
          const std::size_t len = lengths[p];
          if (Tensor* gp = args.input_grads[p]) {
            for (std::size_t o = 0; o < outer; ++o) {
              const double* src = &args.output_grad[(o * total + off) * inner];
              double* dst = &(*gp)[o * len * inner];
              for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
          }
          off += len;
        }
      });
}

Var Slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  const AxisSplit s = SplitAt(av.shape(), axis, "slice");
  if (begin > end || end > s.length) {
    throw ContractViolation("slice: range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") out of bounds for " +
                            ShapeString(av.shape()));
  }
  Shape out_shape = av.shape();
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const std::size_t len = end - begin;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(&av[(o * s.length + begin) * s.inner], len * s.inner,
                &out[o * len * s.inner]);
  }
  return tape.Record(
      "slice", std::move(out), {a}, [s, begin, len](const BackwardArgs& args) {
        Tensor& gx = *args.input_grads[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = &args.output_grad[o * len * s.inner];
          double* dst = &gx[(o * s.length + begin) * s.inner];
          for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
        }
      });
}

Var Sum(Var a) {
  Tape& tape = TapeOf(a);
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return tape.Record("sum", Tensor::Scalar(total), {a},
                     [](const BackwardArgs& args) {
                       const double g = args.output_grad[0];
                       for (double& v : args.input_grads[0]->values()) v += g;
                     });
}

Var Mean(Var a) {
  const std::size_t n = a.value().size();
  Require(n > 0, "mean of an empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<double>(n));
}

Var SumAxis(Var a, std::size_t axis) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  const AxisSplit s = SplitAt(av.shape(), axis, "sum_axis");
  Tensor out(WithoutAxis(av.shape(), axis));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.length; ++l) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[o * s.inner + i] += av[(o * s.length + l) * s.inner + i];
      }
    }
  }
  return tape.Record("sum_axis", std::move(out), {a},
                     [s](const BackwardArgs& args) {
                       Tensor& gx = *args.input_grads[0];
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t l = 0; l < s.length; ++l) {
                           for (std::size_t i = 0; i < s.inner; ++i) {
                             gx[(o * s.length + l) * s.inner + i] +=
                                 args.output_grad[o * s.inner + i];
                           }
                         }
                       }
                     });
}

Var L2Norm(Var a, std::size_t axis) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  const AxisSplit s = SplitAt(av.shape(), axis, "l2_norm");
  Tensor out(WithoutAxis(av.shape(), axis));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < s.length; ++l) {
        const double v = av[(o * s.length + l) * s.inner + i];
        acc += v * v;
      }
      out[o * s.inner + i] = std::sqrt(acc);
    }
  }
  return tape.Record(
      "l2_norm", std::move(out), {a}, [s](const BackwardArgs& args) {
        const Tensor& x = *args.inputs[0];
        Tensor& gx = *args.input_grads[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const double norm = args.output[o * s.inner + i];
            if (norm == 0.0) continue;
            const double g = args.output_grad[o * s.inner + i] / norm;
            for (std::size_t l = 0; l < s.length; ++l) {
              const std::size_t idx = (o * s.length + l) * s.inner + i;
              gx[idx] += g * x[idx];
            }
          }
        }
      });
}

Var Embedding(Var table, std::span<const int> ids) {
  Tape& tape = TapeOf(table);
  const Tensor& tv = table.value();
  if (tv.rank() != 2) {
    throw ContractViolation("embedding table must be 2-D, got " +
                            ShapeString(tv.shape()));
  }
  const std::size_t rows = tv.dim(0), width = tv.dim(1);
  Tensor out(Shape{ids.size(), width});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw ContractViolation("embedding: id " + std::to_string(ids[i]) +
                              " outside vocabulary of " +
                              std::to_string(rows));
    }
    std::copy_n(&tv[static_cast<std::size_t>(ids[i]) * width], width,
                &out[i * width]);
  }
  std::vector<int> captured(ids.begin(), ids.end());
  return tape.Record("embedding", std::move(out), {table},
                     [captured = std::move(captured),
                      width](const BackwardArgs& args) {
                       Tensor& gt = *args.input_grads[0];
                       for (std::size_t i = 0; i < captured.size(); ++i) {
                         const double* src = &args.output_grad[i * width];
                         double* dst =
                             &gt[static_cast<std::size_t>(captured[i]) * width];
                         for (std::size_t j = 0; j < width; ++j) {
                           dst[j] += src[j];
                         }
                       }
                     });
}

Var CrossEntropyWithLogits(Var logits, std::span<const int> labels) {
  Tape& tape = TapeOf(logits);
  const Tensor& lv = logits.value();
  if (lv.rank() != 2 || lv.dim(0) != labels.size() || labels.empty()) {
    throw ContractViolation("cross entropy: logits " +
                            ShapeString(lv.shape()) + " vs " +
                            std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = lv.dim(0), classes = lv.dim(1);
  Tensor probs(lv.shape());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ContractViolation("cross entropy: label " + std::to_string(label) +
                              " outside " + std::to_string(classes) +
                              " classes");
    }
    double max = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      max = std::max(max, lv.at(b, c));
    }
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs.at(b, c) = std::exp(lv.at(b, c) - max);
      total += probs.at(b, c);
    }
    for (std::size_t c = 0; c < classes; ++c) probs.at(b, c) /= total;
    loss += -(lv.at(b, static_cast<std::size_t>(label)) - max -
              std::log(total));
  }
  loss /= static_cast<double>(batch);
  std::vector<int> captured(labels.begin(), labels.end());
  return tape.Record(
      "cross_entropy", Tensor::Scalar(loss), {logits},
      [probs = std::move(probs), captured = std::move(captured), batch,
       classes](const BackwardArgs& args) {
        const double g = args.output_grad[0] / static_cast<double>(batch);
        Tensor& gx = *args.input_grads[0];
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            double d = probs.at(b, c);
            if (static_cast<int>(c) == captured[b]) d -= 1.0;
            gx[b * classes + c] += g * d;
          }
        }
      });
}

Var Reshape(Var a, Shape shape) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  if (NumElements(shape) != av.size()) {
    throw ContractViolation("reshape: " + ShapeString(av.shape()) + " to " +
                            ShapeString(shape));
  }
  Tensor out(std::move(shape), av.storage());
  return tape.Record("reshape", std::move(out), {a},
                     [](const BackwardArgs& args) {
                       Tensor& gx = *args.input_grads[0];
                       for (std::size_t i = 0; i < gx.size(); ++i) {
                         gx[i] += args.output_grad[i];
                       }
                     });
}

Var Transpose(Var a) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  if (av.rank() != 2) {
    throw ContractViolation("transpose needs a 2-D tensor, got " +
                            ShapeString(av.shape()));
  }
  const std::size_t rows = av.dim(0), cols = av.dim(1);
  Tensor out(Shape{cols, rows});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = av[r * cols + c];
  }
  return tape.Record("transpose", std::move(out), {a},
                     [rows, cols](const BackwardArgs& args) {
                       Tensor& gx = *args.input_grads[0];
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) {
                           gx[r * cols + c] += args.output_grad[c * rows + r];
                         }
                       }
                     });
}

namespace {

double Logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var LstmCell(Var gates, Var cell) {
  Tape& tape = TapeOf(gates);
  const Tensor& z = gates.value();
  const Tensor& c_prev = cell.value();
  if (z.rank() != 2 || c_prev.rank() != 2 || z.dim(0) != c_prev.dim(0) ||
      z.dim(1) != 4 * c_prev.dim(1)) {
    throw ContractViolation("lstm_cell: gates " + ShapeString(z.shape()) +
                            " vs cell " + ShapeString(c_prev.shape()));
  }
  const std::size_t batch = z.dim(0), h = c_prev.dim(1);
  Tensor out(Shape{batch, 2 * h});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* zr = &z[b * 4 * h];
    for (std::size_t j = 0; j < h; ++j) {
      const double i = Logistic(zr[j]);
      const double f = Logistic(zr[h + j]);
      const double g = std::tanh(zr[2 * h + j]);
      const double o = Logistic(zr[3 * h + j]);
      const double c = f * c_prev[b * h + j] + i * g;
      out[b * 2 * h + j] = o * std::tanh(c);
      out[b * 2 * h + h + j] = c;
    }
  }
  return tape.Record(
      "lstm_cell", std::move(out), {gates, cell},
      [batch, h](const BackwardArgs& args) {
        const Tensor& z = *args.inputs[0];
        const Tensor& c_prev = *args.inputs[1];
        const Tensor& y = args.output;
        const Tensor& gy = args.output_grad;
        Tensor* gz = args.input_grads[0];
        Tensor* gc = args.input_grads[1];
        for (std::size_t b = 0; b < batch; ++b) {
          const double* zr = &z[b * 4 * h];
          for (std::size_t j = 0; j < h; ++j) {
            const double i = Logistic(zr[j]);
            const double f = Logistic(zr[h + j]);
            const double g = std::tanh(zr[2 * h + j]);
            const double o = Logistic(zr[3 * h + j]);
            const double c = y[b * 2 * h + h + j];
            const double tc = std::tanh(c);
            const double dh = gy[b * 2 * h + j];
            const double dc = gy[b * 2 * h + h + j] + dh * o * (1.0 - tc * tc);
            if (gz) {
              double* gzr = &(*gz)[b * 4 * h];
              gzr[j] += dc * g * i * (1.0 - i);
              gzr[h + j] += dc * c_prev[b * h + j] * f * (1.0 - f);
              gzr[2 * h + j] += dc * i * (1.0 - g * g);
              gzr[3 * h + j] += dh * tc * o * (1.0 - o);
            }
            if (gc) (*gc)[b * h + j] += dc * f;
          }
        }
      });
}

}  // namespace roarbench::grad
