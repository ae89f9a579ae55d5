#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparselab/mask.hpp"
#include "sparselab/tensor.hpp"

namespace sparselab {

struct SgdOptions {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// A trainable tensor together with the mask constraining it (null for biases).
struct ParamSlot {
  Tensor* param = nullptr;
  const LayerMask* mask = nullptr;
};

// SGD with classic coupled weight decay:
//   v <- momentum * v + (grad + weight_decay * theta)
//   theta <- theta - lr * v
// followed by projection of every masked-out weight back to exactly 0.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdOptions options);

  const SgdOptions& options() const noexcept { return options_; }
  void set_learning_rate(double lr);

  // Slots must be passed in the same order on every call; velocity buffers
  // are keyed by position.
  void step(std::span<const ParamSlot> slots);
  void reset() { velocity_.clear(); }

  std::span<const Scalar> velocity(std::size_t slot) const;

 private:
  SgdOptions options_;
  std::vector<std::vector<Scalar>> velocity_;
};

inline void sgd_step(SgdOptimizer& optimizer, std::span<const ParamSlot> slots) { optimizer.step(slots); }

// lr(epoch) = initial_lr * factor^(number of milestones <= epoch); epochs are
// counted from 0.
class StepLrSchedule {
 public:
  StepLrSchedule(double initial_lr, std::vector<std::size_t> milestones, double factor = 0.1);

  double lr(std::size_t epoch) const;
  const std::vector<std::size_t>& milestones() const noexcept { return milestones_; }

 private:
  double initial_lr_;
  std::vector<std::size_t> milestones_;
  double factor_;
};

}  // namespace sparselab
