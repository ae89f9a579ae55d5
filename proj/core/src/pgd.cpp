#include "sparselab/pgd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/ops.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {
namespace {

void check_attack(const AttackConfig& c) {
  if (!(c.epsilon >= 0.0) || !(c.alpha >= 0.0)) throw InputError("attack epsilon and alpha must be nonnegative");
}

Scalar project(Scalar delta, Scalar x, Scalar eps) {
  delta = std::clamp(delta, -eps, eps);
  // Keep x + delta inside [0,1] without disturbing in-range values.
  if (delta < -x) delta = -x;
  if (delta > Scalar{1} - x) delta = Scalar{1} - x;
  return delta;
}

}  // namespace

Perturbation pgd_attack(const InputGradientFn& gradient, const Tensor& x, const AttackConfig& config,
                        std::uint64_t seed) {
  check_attack(config);
  const auto eps = static_cast<Scalar>(config.epsilon);
  const auto alpha = static_cast<Scalar>(config.alpha);
  Perturbation p{Tensor(x.dims()), config.epsilon, config.alpha, config.steps};
  if (config.random_start && eps > 0) {
    Rng rng = make_rng(seed, "pgd-start");
    std::uniform_real_distribution<double> u(-config.epsilon, config.epsilon);
    for (auto& d : p.delta.values()) d = static_cast<Scalar>(u(rng));
  }
  for (std::size_t i = 0; i < x.numel(); ++i) p.delta[i] = project(p.delta[i], x[i], eps);

  for (std::size_t t = 0; t < config.steps; ++t) {
    const Tensor g = gradient(perturbed(x, p));
    if (g.dims() != x.dims()) throw DimensionError("input gradient dims differ from input");
    if (!g.all_finite()) throw NumericalError("PGD: non-finite input gradient at step " + std::to_string(t));
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const Scalar s = g[i] > 0 ? Scalar{1} : (g[i] < 0 ? Scalar{-1} : Scalar{0});
      p.delta[i] = project(p.delta[i] + alpha * s, x[i], eps);
    }
  }
  return p;
}

Perturbation pgd_attack(Model& model, const MaskSet* masks, const Tensor& x, std::span<const int> labels,
                        const AttackConfig& config, std::uint64_t seed) {
  const Tensor targets = one_hot(labels, model.spec().classes);
  auto gradient = [&](const Tensor& x_adv) {
    Tape tape;
    Var xv = tape.input(x_adv);
    auto ce = softmax_cross_entropy(model.forward(tape, xv, masks, /*param_grads=*/false), targets);
    tape.backward(ce.loss);
    auto g = tape.grad(xv);
    return Tensor(x_adv.dims(), std::vector<Scalar>(g.begin(), g.end()));
  };
  return pgd_attack(gradient, x, config, seed);
}

Tensor perturbed(const Tensor& x, const Perturbation& p) {
  if (p.delta.dims() != x.dims()) throw DimensionError("perturbation dims differ from input");
  Tensor out(x.dims());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] + p.delta[i];
  return out;
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t classes = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const Scalar* z = logits.data() + r * classes;
    const auto pred = static_cast<int>(std::max_element(z, z + classes) - z);
    if (pred == labels[r]) ++correct;
  }
  return correct;
}

StepResult train_step(Model& model, const MaskSet* masks, SgdOptimizer& optimizer, const Tensor& x,
                      std::span<const int> labels) {
  const Tensor targets = one_hot(labels, model.spec().classes);
  model.zero_grad();
  Tape tape;
  Var logits = model.forward(tape, tape.constant(x), masks);
  auto ce = softmax_cross_entropy(logits, targets);
  const double loss = ce.loss.value()[0];
  if (!std::isfinite(loss)) throw NumericalError("non-finite training loss");
  tape.backward(ce.loss);
  const auto slots = model.parameters(masks);
  optimizer.step(slots);
  return {loss, count_correct(logits.value(), labels)};
}

StepResult adversarial_train_step(Model& model, const MaskSet* masks, SgdOptimizer& optimizer, const Tensor& x,
                                  std::span<const int> labels, const AttackConfig& attack, std::uint64_t seed) {
  const Perturbation p = pgd_attack(model, masks, x, labels, attack, seed);
  return train_step(model, masks, optimizer, perturbed(x, p), labels);
}

EvalResult evaluate(Model& model, const MaskSet* masks, const Dataset& data, const std::optional<AttackConfig>& attack,
                    std::uint64_t seed, std::size_t batch_size) {
  if (batch_size == 0) throw InputError("batch size must be positive");
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::size_t clean = 0, adv = 0;
  const std::uint64_t attack_seed = derive_seed(seed, "eval-attack");
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::span<const std::size_t> batch(idx.data() + start, std::min(batch_size, n - start));
    const Tensor x = data.gather_images(batch);
    const std::vector<int> y = data.gather_labels(batch);
    clean += count_correct(model.predict(x, masks), y);
    if (attack) {
      const Perturbation p = pgd_attack(model, masks, x, y, *attack, derive_seed(attack_seed, start));
      adv += count_correct(model.predict(perturbed(x, p), masks), y);
    }
  }
  EvalResult r;
  r.clean_acc = static_cast<double>(clean) / static_cast<double>(n);
  if (attack) r.adv_acc = static_cast<double>(adv) / static_cast<double>(n);
  return r;
}

}  // namespace sparselab
