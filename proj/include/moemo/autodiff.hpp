#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "moemo/tensor.hpp"

namespace moemo::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
};

/// Hands each backward rule mutable gradient buffers for its parents.
class GradSink {
 public:
  /// True when parent `slot` takes part in differentiation.
  bool wants(std::size_t slot) const;
  /// Gradient buffer of parent `slot`, shaped like its value; accumulate into it.
  std::span<double> buffer(std::size_t slot);
  void add(std::size_t slot, std::span<const double> grad);

 private:
  friend class Tape;
  GradSink(Tape& tape, std::span<const std::size_t> parents) : tape_(tape), parents_(parents) {}
  Tape& tape_;
  std::span<const std::size_t> parents_;
};

using BackwardFn = std::function<void(std::span<const double> grad_out, GradSink& sink)>;

/// Record-on-execute reverse-mode tape.
///
/// Nodes are appended in execution order, so parents always precede children.
/// A tape is used by one thread for one forward/backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf node; differentiable when `value.requires_grad()` is set.
  Var leaf(const Tensor& value);
  Var constant(const Tensor& value);
  /// Appends an operation result. `backward` is dropped when no parent needs gradients.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }
  std::size_t size() const { return nodes_.size(); }

  /// Back-propagates from a single-element loss node. Throws ShapeError otherwise.
  void backward(Var loss);

  /// Gradient accumulated on a node after backward(); zeros when none reached it.
  Tensor grad(Var v) const;
  bool has_grad(Var v) const;

 private:
  friend class GradSink;
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::span<double> grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// Forward operations. Each records its gradient rule on the operands' tape.

/// [m x k] . [k x n] -> [m x n]
Var matmul(Var a, Var b);
/// 2-D transpose.
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Adds a bias of shape {last dim} to every row of `a`.
Var add_bias(Var a, Var bias);
Var relu(Var a);
/// Exact GELU, x * Phi(x).
Var gelu(Var a);
/// Normalizes over the last axis, then applies gain and bias (both {last dim}).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var softmax(Var x, std::size_t axis);
Var log_softmax(Var x, std::size_t axis);
/// Valid 1-D convolution over the rows of `x` [length x in]:
/// weight [kernel x in x out], bias [out] -> [(length - kernel + 1) x out].
Var conv1d(Var x, Var weight, Var bias);
Var concat(std::span<const Var> parts, std::size_t axis);
/// Mean over `axis`; the axis is removed (a rank-1 input yields shape {1}).
Var mean(Var x, std::size_t axis);
/// Sum of all elements, shape {1}.
Var sum(Var x);
/// Contiguous slice [start, start + length) along `axis`.
Var narrow(Var x, std::size_t axis, std::size_t start, std::size_t length);
/// Mean over rows of -log softmax(logits)[label]; logits [n x classes].
Var cross_entropy_with_logits(Var logits, std::span<const int> labels);

/// Row-wise softmax of plain data, max-subtracted.
Tensor softmax_rows(const Tensor& x);

}  // namespace moemo::ad
