#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sparselab/tensor.hpp"

namespace sparselab {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// that produced it is alive and not cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& dims() const { return value().dims(); }
  bool requires_grad() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode computation tape. Operations append nodes in evaluation order;
// backward() replays their rules in reverse. Parameters are referenced, not
// copied, and receive their gradient in their own grad slot.
class Tape {
 public:
  // Called with the gradient flowing into the node's output. Implementations
  // add their contributions via Tape::grad_slot(parent).
  using BackwardFn = std::function<void(Tape& tape, std::span<const Scalar> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A value that never receives a gradient. Constants and inputs must be
  // finite (NumericalError otherwise).
  Var constant(Tensor value);
  // A value whose gradient is kept on the tape (readable through grad()).
  Var input(Tensor value);
  // Refers to an externally owned tensor; backward() accumulates into its
  // grad slot. The tensor must outlive the tape's use of it.
  Var parameter(Tensor& param);

  // Appends an operation node. The backward rule is only invoked when at
  // least one parent requires a gradient. Throws NumericalError if the value
  // holds NaN/Inf.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  // Gradient of `loss` (a one-element value) with respect to every node.
  // Parameter gradients are added to whatever their grad slot already holds,
  // so calling twice without zeroing accumulates.
  void backward(Var loss);

  // Gradient buffer of a node during backward(); empty span when the node
  // does not require a gradient.
  std::span<Scalar> grad_slot(Var v);
  // Gradient of a node after backward(); empty if none was computed.
  std::span<const Scalar> grad(Var v) const;

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor owned;
    Tensor* external = nullptr;
    bool requires_grad = false;
    std::vector<Scalar> grad;
    BackwardFn backward;

    const Tensor& value() const { return external ? *external : owned; }
  };

  Var push(Node node);
  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
};

}  // namespace sparselab
