#include "sparselab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "sparselab/error.hpp"

namespace sparselab {

SgdOptimizer::SgdOptimizer(SgdOptions options) : options_(options) {
  if (!(options_.learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (!(options_.momentum >= 0.0 && options_.momentum < 1.0)) throw InputError("momentum must lie in [0, 1)");
  if (!(options_.weight_decay >= 0.0)) throw InputError("weight decay must be nonnegative");
}

void SgdOptimizer::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw InputError("learning rate must be positive");
  options_.learning_rate = lr;
}

void SgdOptimizer::step(std::span<const ParamSlot> slots) {
  if (velocity_.empty()) {
    velocity_.resize(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) velocity_[i].assign(slots[i].param->numel(), Scalar{0});
  }
  if (velocity_.size() != slots.size()) throw InputError("optimizer called with a different parameter list");

  const auto lr = static_cast<Scalar>(options_.learning_rate);
  const auto mu = static_cast<Scalar>(options_.momentum);
  const auto wd = static_cast<Scalar>(options_.weight_decay);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    Tensor& p = *slots[s].param;
    auto& v = velocity_[s];
    if (v.size() != p.numel()) throw InputError("parameter size changed between optimizer steps");
    if (!p.has_grad()) throw InputError("sgd step on a parameter without gradient");
    auto g = p.grad();
    auto theta = p.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = mu * v[i] + (g[i] + wd * theta[i]);
      theta[i] -= lr * v[i];
    }
    if (slots[s].mask) slots[s].mask->apply(theta);
  }
}

std::span<const Scalar> SgdOptimizer::velocity(std::size_t slot) const {
  if (slot >= velocity_.size()) return {};
  return velocity_[slot];
}

StepLrSchedule::StepLrSchedule(double initial_lr, std::vector<std::size_t> milestones, double factor)
    : initial_lr_(initial_lr), milestones_(std::move(milestones)), factor_(factor) {
  if (!(initial_lr_ > 0.0)) throw InputError("initial learning rate must be positive");
  if (!(factor_ > 0.0 && factor_ < 1.0)) throw InputError("lr factor must lie in (0, 1)");
  if (!std::is_sorted(milestones_.begin(), milestones_.end())) throw InputError("milestones must be sorted");
}

double StepLrSchedule::lr(std::size_t epoch) const {
  const auto passed = std::upper_bound(milestones_.begin(), milestones_.end(), epoch) - milestones_.begin();
  return initial_lr_ * std::pow(factor_, static_cast<double>(passed));
}

}  // namespace sparselab
