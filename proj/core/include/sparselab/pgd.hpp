#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "sparselab/dataset.hpp"
#include "sparselab/mask.hpp"
#include "sparselab/model.hpp"
#include "sparselab/optim.hpp"

namespace sparselab {

struct AttackConfig {
  double epsilon = 8.0 / 255.0;  // l-infinity budget
  double alpha = 2.0 / 255.0;    // step size
  std::size_t steps = 10;
  bool random_start = true;      // delta^0 ~ U[-eps, eps], else 0
};

// delta has the dims of the attacked input (a batch of images).
struct Perturbation {
  Tensor delta;
  double epsilon = 0.0;
  double alpha = 0.0;
  std::size_t steps = 0;
};

// Gradient of the attacked loss with respect to the (perturbed) input.
using InputGradientFn = std::function<Tensor(const Tensor& x_adv)>;

// delta^{t+1} = proj[delta^t + alpha * sign(grad_x L(x + delta^t))], with
// sign(0) = 0. The projection clamps each element to [-eps, eps] and then to
// [-x, 1 - x] so that x + delta stays inside [0,1]. delta^0 is projected the
// same way. Throws NumericalError on a non-finite gradient.
Perturbation pgd_attack(const InputGradientFn& gradient, const Tensor& x, const AttackConfig& config,
                        std::uint64_t seed);

// PGD on softmax cross-entropy of the (masked) model.
Perturbation pgd_attack(Model& model, const MaskSet* masks, const Tensor& x, std::span<const int> labels,
                        const AttackConfig& config, std::uint64_t seed);

// Tensor x + delta.
Tensor perturbed(const Tensor& x, const Perturbation& p);

struct StepResult {
  double loss = 0.0;      // loss on the batch the optimizer stepped on
  std::size_t correct = 0;
};

// One clean SGD step (zero grad, forward, backward, masked step).
StepResult train_step(Model& model, const MaskSet* masks, SgdOptimizer& optimizer, const Tensor& x,
                      std::span<const int> labels);

// Inner maximization by PGD at the current parameters, then one SGD step on
// the perturbed batch. With epsilon = 0 this is exactly train_step.
StepResult adversarial_train_step(Model& model, const MaskSet* masks, SgdOptimizer& optimizer, const Tensor& x,
                                  std::span<const int> labels, const AttackConfig& attack, std::uint64_t seed);

struct EvalResult {
  double clean_acc = 0.0;
  std::optional<double> adv_acc;
};

// Clean accuracy, plus adversarial accuracy when an attack is given. Batch b
// of the attack uses the stream derived from (seed, first index of b).
EvalResult evaluate(Model& model, const MaskSet* masks, const Dataset& data,
                    const std::optional<AttackConfig>& attack = std::nullopt, std::uint64_t seed = 0,
                    std::size_t batch_size = 256);

std::size_t count_correct(const Tensor& logits, std::span<const int> labels);

}  // namespace sparselab
