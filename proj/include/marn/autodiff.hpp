#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "marn/tensor.hpp"

namespace marn {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Append-only record of a define-by-run computation. backward() walks the
// nodes in exact reverse append order. A tape is single-owner; build a new
// one per optimizer step.
class Tape {
 public:
  // Local-gradient rule of one node: reads grad(self) and accumulates into
  // the gradients of its inputs.
  using Backprop = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  // Same value, cut from the graph: nothing upstream receives gradient through it.
  Var detach(Var v);

  // Records an op output. The rule is dropped when no input requires grad.
  Var record(Tensor value, std::span<const Var> inputs, Backprop rule);

  // Zeroes every gradient, seeds d(loss)/d(loss) = 1 and propagates.
  void backward(Var loss);

  // Gradient after backward(); exact zeros for nodes not on the loss path.
  Tensor grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  // Drops every node appended after the first n. Vars pointing past n become dangling.
  void truncate(std::size_t n);

  // Accessors used by op rules during backward.
  const Tensor& value_of(std::uint32_t id) const { return nodes_[id].value; }
  const Tensor& grad_of(std::uint32_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  // Gradient accumulator of a node, allocated as zeros on first use.
  Tensor& grad_buffer(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backprop rule;
  };
  std::vector<Node> nodes_;
};

// Differentiable operations. Rank-1 operands of matmul act as a row (left)
// or a column (right), so matmul covers matrix-vector, vector-matrix and dot.
namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// Adds a length-q vector to every row of a p×q matrix.
Var add_rowvec(Var m, Var v);

Var tanh(Var a);
Var sigmoid(Var a);
// Subgradient at 0 is 0.
Var abs(Var a);
Var log(Var a);

Var softmax(Var x);
Var log_softmax(Var x);

Var sum(Var a);
Var pick(Var x, std::size_t index);
Var concat(std::span<const Var> parts);
Var slice(Var x, std::size_t begin, std::size_t end);
Var column(Var m, std::size_t j);
Var slice_cols(Var m, std::size_t begin, std::size_t end);

}  // namespace ad

// Plain numerical softmax with max-subtraction; throws on empty input.
Tensor softmax(const Tensor& x);

}  // namespace marn
