#include "sparselab/tape.hpp"

#include <algorithm>

#include "sparselab/error.hpp"

namespace sparselab {

const Tensor& Var::value() const { return tape_->value(*this); }

bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw InputError("variable does not belong to this tape");
  return nodes_[v.id_];
}

Tape::Node& Tape::node(Var v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw InputError("variable does not belong to this tape");
  return nodes_[v.id_];
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericalError("non-finite value entered the tape");
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Tensor value) {
  if (!value.all_finite()) throw NumericalError("non-finite value entered the tape");
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Tensor& param) {
  Node n;
  n.external = &param;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  if (!value.all_finite()) throw NumericalError("non-finite value produced on the tape");
  Node n;
  n.owned = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                [this](const Var& p) { return node(p).requires_grad; });
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

std::span<Scalar> Tape::grad_slot(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return {};
  if (n.grad.empty()) n.grad.assign(n.value().numel(), Scalar{0});
  return n.grad;
}

std::span<const Scalar> Tape::grad(Var v) const { return node(v).grad; }

const Tensor& Tape::value(Var v) const { return node(v).value(); }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::backward(Var loss) {
  Node& root = node(loss);
  if (root.value().numel() != 1) throw DimensionError("backward() needs a one-element loss");
  for (auto& n : nodes_) n.grad.clear();
  if (!root.requires_grad) return;
  root.grad.assign(1, Scalar{1});

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      // The rule may add to earlier nodes' grads, never to its own.
      n.backward(*this, n.grad);
    }
    if (n.external) {
      auto dst = n.external->grad();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace sparselab
