#include "sparselab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/ops.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(std::span<Tensor* const> tensors, const std::function<double()>& loss,
                                const GradCheckOptions& options) {
  std::size_t total = 0;
  for (const Tensor* t : tensors) total += t->numel();
  if (total == 0) throw InputError("gradient check over no elements");

  Rng rng = make_rng(options.seed, "gradcheck");
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  const double h = options.step;

  struct Probe {
    double central, forward, backward;
  };
  auto probe = [&](Scalar& slot, double step, double at) {
    const Scalar saved = slot;
    slot = static_cast<Scalar>(saved + step);
    const double up = loss();
    slot = static_cast<Scalar>(saved - step);
    const double down = loss();
    slot = saved;
    return Probe{(up - down) / (2.0 * step), (up - at) / step, (at - down) / step};
  };

  const double at = loss();
  GradCheckReport report;
  const std::size_t max_draws = options.samples * 20;
  for (std::size_t draw = 0; draw < max_draws && report.checked < options.samples; ++draw) {
    std::size_t flat = pick(rng);
    std::size_t t = 0;
    while (flat >= tensors[t]->numel()) flat -= tensors[t++]->numel();
    Tensor& tensor = *tensors[t];
    if (!tensor.has_grad()) throw InputError("gradient check on a tensor without analytic gradient");

    const double analytic = tensor.grad()[flat];
    const Probe full = probe(tensor[flat], h, at);
    const Probe half = probe(tensor[flat], h / 2, at);
    const double numeric = full.central;
    // A kink inside [x - h, x + h] shows up as disagreeing step sizes; a kink
    // exactly at x as disagreeing one-sided slopes.
    if (relative_error(numeric, half.central, options.denominator_floor) > 1e-3 ||
        relative_error(full.forward, full.backward, options.denominator_floor) > 1e-2) {
      ++report.skipped_nonsmooth;
      continue;
    }
    report.max_relative_error =
        std::max(report.max_relative_error, relative_error(analytic, numeric, options.denominator_floor));
    ++report.checked;
  }
  report.passed = report.checked == options.samples && report.max_relative_error < options.tolerance;
  return report;
}

GradCheckReport gradient_check(Model& model, const MaskSet* masks, const Tensor& x, std::span<const int> labels,
                               const GradCheckOptions& options) {
  const Tensor targets = one_hot(labels, model.spec().classes);
  model.zero_grad();
  {
    Tape tape;
    auto ce = softmax_cross_entropy(model.forward(tape, tape.constant(x), masks), targets);
    tape.backward(ce.loss);
  }
  auto loss = [&]() {
    Tape tape;
    return static_cast<double>(softmax_cross_entropy(model.forward(tape, tape.constant(x), masks), targets)
                                   .loss.value()[0]);
  };
  std::vector<Tensor*> tensors;
  for (auto& [name, t] : model.named_parameters()) tensors.push_back(t);
  return check_gradients(tensors, loss, options);
}

}  // namespace sparselab
