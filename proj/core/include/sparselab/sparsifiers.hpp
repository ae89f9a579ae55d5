#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sparselab/density.hpp"
#include "sparselab/rng.hpp"
#include "sparselab/trainer.hpp"

namespace sparselab {

// Gradual magnitude pruning. Sparsity follows the cubic ramp
//   s_t = s * (1 - (1 - (t - t0) / (t1 - t0))^3)
// between epochs t0 = round(t0_frac * E) and t1 = min(round(t1_frac * E), E - 1),
// updated every `interval` epochs from t0 and always at t1. Each update
// applies global magnitude pruning restricted to still-active weights, so
// masks only ever lose entries.
class GmpController final : public TrainingHooks {
 public:
  GmpController(double target_sparsity, double t0_frac = 0.10, double t1_frac = 0.80, std::size_t interval = 4);

  std::string name() const override { return "gmp"; }
  void on_init(TrainContext& ctx) override;
  void on_epoch_start(TrainContext& ctx, std::size_t epoch) override;

  static double sparsity_at(double target, double t, double t0, double t1);
  std::size_t start_epoch(std::size_t epochs) const;
  std::size_t end_epoch(std::size_t epochs) const;

 private:
  double target_;
  double t0_frac_;
  double t1_frac_;
  std::size_t interval_;
};

struct SetEvent {
  std::size_t epoch = 0;
  std::size_t layer = 0;
  std::size_t pruned = 0;
  std::size_t regrown = 0;
  bool skipped_dense = false;  // fully dense layer: nothing to regrow into
};

// Sparse evolutionary training on an ERK topology. Every `interval` epochs
// (while epoch < stop_frac * E) each layer drops the round(zeta * active)
// smallest-|w| active weights and regrows as many at random inactive
// positions, initialized to 0; per-layer nonzero counts are conserved.
class SetController final : public TrainingHooks {
 public:
  SetController(double target_sparsity, std::uint64_t seed, double zeta = 0.3, std::size_t interval = 4,
                double stop_frac = 0.75);

  std::string name() const override { return "set"; }
  void on_init(TrainContext& ctx) override;
  void on_epoch_start(TrainContext& ctx, std::size_t epoch) override;

  const std::vector<SetEvent>& events() const noexcept { return events_; }

  // One prune-and-regrow event on a single layer; exposed for testing.
  SetEvent prune_and_regrow(Tensor& weights, LayerMask& mask, Rng& rng) const;

 private:
  double target_;
  std::uint64_t seed_;
  double zeta_;
  std::size_t interval_;
  double stop_frac_;
  Rng regrow_rng_;
  std::vector<SetEvent> events_;
};

// |theta| * |dL/dtheta| per weight.
std::vector<Tensor> snip_scores(std::span<const Tensor> weights, std::span<const Tensor> gradients);

// Single-shot pruning at initialization: one forward/backward on a minibatch
// of the training set scores every weight, the global top (1 - s) fraction by
// score survives, and the topology is frozen.
class SnipController final : public TrainingHooks {
 public:
  SnipController(double target_sparsity, std::size_t score_batch_size = 128);

  std::string name() const override { return "snip"; }
  void on_init(TrainContext& ctx) override;

 private:
  double target_;
  std::size_t batch_size_;
};

// Installs a fixed mask set at init and never changes it.
class FixedMaskController final : public TrainingHooks {
 public:
  FixedMaskController(std::string name, MaskSet masks) : name_(std::move(name)), masks_(std::move(masks)) {}

  std::string name() const override { return name_; }
  void on_init(TrainContext& ctx) override;
  const MaskSet& masks() const noexcept { return masks_; }

 private:
  std::string name_;
  MaskSet masks_;
};

// ERK plan + random placement from the "topology" stream of `seed`; SET uses
// the same derivation, so both start from identical masks.
MaskSet erk_random_masks(std::span<const LayerSpec> layers, double target_sparsity, std::uint64_t seed);

// Random-fixed (plan_kind erk) and Uniform-fixed (plan_kind uniform) baselines.
std::unique_ptr<FixedMaskController> fixed_random_controller(PlanKind plan_kind, double target_sparsity,
                                                             std::span<const LayerSpec> layers, std::uint64_t seed);

}  // namespace sparselab
