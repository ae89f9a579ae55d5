#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "sparselab/mask.hpp"
#include "sparselab/model.hpp"

namespace sparselab {

struct GradCheckOptions {
  double step = 1e-5;          // central-difference step h
  std::size_t samples = 100;   // elements compared (with replacement across tensors)
  double tolerance = 1e-4;     // pass threshold on max relative error
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Elements whose h and h/2 estimates or whose one-sided slopes disagree,
  // i.e. the probe straddles or sits on a ReLU / max-pool kink where finite
  // differences are meaningless. They are replaced by fresh samples.
  std::size_t skipped_nonsmooth = 0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

// Compares the analytic gradients already stored in each tensor's grad slot
// with central differences of `loss`, which must re-evaluate the loss from
// the tensors' current values.
GradCheckReport check_gradients(std::span<Tensor* const> tensors, const std::function<double()>& loss,
                                const GradCheckOptions& options);

// Softmax cross-entropy of `model` on (x, labels), checked over every weight
// and bias.
GradCheckReport gradient_check(Model& model, const MaskSet* masks, const Tensor& x, std::span<const int> labels,
                               const GradCheckOptions& options = {});

}  // namespace sparselab
