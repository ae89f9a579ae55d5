#include "sparselab/sparsifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/ops.hpp"

namespace sparselab {
namespace {

void check_target(double s) {
  if (!(s >= 0.0 && s < 1.0)) throw InputError("target sparsity must lie in [0, 1), got " + std::to_string(s));
}

}  // namespace

// ---- GMP -------------------------------------------------------------------

GmpController::GmpController(double target_sparsity, double t0_frac, double t1_frac, std::size_t interval)
    : target_(target_sparsity), t0_frac_(t0_frac), t1_frac_(t1_frac), interval_(interval) {
  check_target(target_);
  if (!(t0_frac_ >= 0.0 && t0_frac_ <= t1_frac_ && t1_frac_ <= 1.0)) throw InputError("GMP needs 0 <= t0 <= t1 <= 1");
  if (interval_ == 0) throw InputError("GMP interval must be positive");
}

double GmpController::sparsity_at(double target, double t, double t0, double t1) {
  if (t < t0) return 0.0;
  if (t >= t1) return target;
  const double progress = (t - t0) / (t1 - t0);
  return target * (1.0 - std::pow(1.0 - progress, 3));
}

std::size_t GmpController::start_epoch(std::size_t epochs) const {
  return std::min(static_cast<std::size_t>(std::llround(t0_frac_ * static_cast<double>(epochs))), end_epoch(epochs));
}

std::size_t GmpController::end_epoch(std::size_t epochs) const {
  const auto t1 = static_cast<std::size_t>(std::llround(t1_frac_ * static_cast<double>(epochs)));
  return std::min(t1, epochs - 1);
}

void GmpController::on_init(TrainContext& ctx) { ctx.masks = full_masks(ctx.model.weights()); }

void GmpController::on_epoch_start(TrainContext& ctx, std::size_t epoch) {
  const std::size_t t0 = start_epoch(ctx.schedule.epochs);
  const std::size_t t1 = end_epoch(ctx.schedule.epochs);
  if (epoch < t0 || epoch > t1) return;
  if ((epoch - t0) % interval_ != 0 && epoch != t1) return;
  const double s = sparsity_at(target_, static_cast<double>(epoch), static_cast<double>(t0), static_cast<double>(t1));
  ctx.masks = global_magnitude_mask(ctx.model.weights(), s, &ctx.masks);
  ctx.model.apply_masks(ctx.masks);
}

// ---- SET -------------------------------------------------------------------

MaskSet erk_random_masks(std::span<const LayerSpec> layers, double target_sparsity, std::uint64_t seed) {
  check_target(target_sparsity);
  const DensityPlan plan = solve_erk_plan(layers, 1.0 - target_sparsity);
  return random_mask_from_plan(plan, layers, derive_seed(seed, "topology"));
}

SetController::SetController(double target_sparsity, std::uint64_t seed, double zeta, std::size_t interval,
                             double stop_frac)
    : target_(target_sparsity),
      seed_(seed),
      zeta_(zeta),
      interval_(interval),
      stop_frac_(stop_frac),
      regrow_rng_(derive_seed(seed, "set-regrow")) {
  check_target(target_);
  if (!(zeta_ >= 0.0 && zeta_ <= 1.0)) throw InputError("SET zeta must lie in [0, 1]");
  if (interval_ == 0) throw InputError("SET interval must be positive");
  if (!(stop_frac_ >= 0.0 && stop_frac_ <= 1.0)) throw InputError("SET stop fraction must lie in [0, 1]");
}

void SetController::on_init(TrainContext& ctx) {
  const auto layers = layer_shapes(ctx.model);
  ctx.masks = erk_random_masks(layers, target_, seed_);
  ctx.model.apply_masks(ctx.masks);
}

void SetController::on_epoch_start(TrainContext& ctx, std::size_t epoch) {
  if (epoch == 0 || epoch % interval_ != 0) return;
  if (static_cast<double>(epoch) >= stop_frac_ * static_cast<double>(ctx.schedule.epochs)) return;
  for (std::size_t l = 0; l < ctx.masks.size(); ++l) {
    SetEvent ev = prune_and_regrow(ctx.model.weights()[l], ctx.masks[l], regrow_rng_);
    ev.epoch = epoch;
    ev.layer = l;
    events_.push_back(ev);
  }
}

SetEvent SetController::prune_and_regrow(Tensor& weights, LayerMask& mask, Rng& rng) const {
  if (weights.dims() != mask.dims()) throw DimensionError("SET: mask/weight dims mismatch");
  SetEvent ev;
  std::vector<std::size_t> active, inactive;
  for (std::size_t i = 0; i < mask.size(); ++i) (mask[i] ? active : inactive).push_back(i);
  if (inactive.empty()) {
    ev.skipped_dense = true;
    return ev;
  }
  const auto k = std::min(active.size(),
                          static_cast<std::size_t>(std::llround(zeta_ * static_cast<double>(active.size()))));
  if (k == 0) return ev;

  // Smallest |w| first; among equal magnitudes the later index goes first so
  // earlier positions are kept.
  std::stable_sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    const Scalar ma = std::abs(weights[a]), mb = std::abs(weights[b]);
    if (ma != mb) return ma < mb;
    return a > b;
  });
  std::vector<std::size_t> pruned(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(k));

  std::vector<std::size_t> pool = inactive;
  if (pool.size() < k) pool.insert(pool.end(), pruned.begin(), pruned.end());
  for (std::size_t i : pruned) {
    mask.set(i, false);
    weights[i] = Scalar{0};
  }
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    mask.set(pool[i], true);
    weights[pool[i]] = Scalar{0};
  }
  ev.pruned = k;
  ev.regrown = k;
  return ev;
}

// ---- SNIP ------------------------------------------------------------------

std::vector<Tensor> snip_scores(std::span<const Tensor> weights, std::span<const Tensor> gradients) {
  if (weights.size() != gradients.size()) throw DimensionError("SNIP: weight/gradient count mismatch");
  std::vector<Tensor> scores;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].dims() != gradients[l].dims()) throw DimensionError("SNIP: weight/gradient dims mismatch");
    Tensor s(weights[l].dims());
    for (std::size_t i = 0; i < s.numel(); ++i) s[i] = std::abs(weights[l][i]) * std::abs(gradients[l][i]);
    scores.push_back(std::move(s));
  }
  return scores;
}

SnipController::SnipController(double target_sparsity, std::size_t score_batch_size)
    : target_(target_sparsity), batch_size_(score_batch_size) {
  check_target(target_);
  if (batch_size_ == 0) throw InputError("SNIP score batch must be positive");
}

void SnipController::on_init(TrainContext& ctx) {
  ctx.masks = full_masks(ctx.model.weights());
  const std::size_t n = ctx.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(ctx.seed, "snip-batch");
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(batch_size_, n));

  const Tensor x = ctx.train.gather_images(order);
  const std::vector<int> y = ctx.train.gather_labels(order);
  ctx.model.zero_grad();
  {
    Tape tape;
    auto ce = softmax_cross_entropy(ctx.model.forward(tape, tape.constant(x), &ctx.masks),
                                    one_hot(y, ctx.model.spec().classes));
    tape.backward(ce.loss);
  }
  ctx.ledger.add(ctx.phase, flops_training_step(ctx.model.spec(), &ctx.masks, order.size()));

  std::vector<Tensor> grads;
  for (auto& w : ctx.model.weights()) {
    auto g = w.grad();
    grads.emplace_back(w.dims(), std::vector<Scalar>(g.begin(), g.end()));
  }
  ctx.model.zero_grad();
  ctx.masks = global_top_k_mask(snip_scores(ctx.model.weights(), grads), target_);
  ctx.model.apply_masks(ctx.masks);
}

// ---- fixed topologies ------------------------------------------------------

void FixedMaskController::on_init(TrainContext& ctx) {
  if (masks_.size() != ctx.model.layer_count()) throw DimensionError("fixed masks do not match the model");
  ctx.masks = masks_;
  ctx.model.apply_masks(ctx.masks);
}

std::unique_ptr<FixedMaskController> fixed_random_controller(PlanKind plan_kind, double target_sparsity,
                                                             std::span<const LayerSpec> layers, std::uint64_t seed) {
  check_target(target_sparsity);
  if (plan_kind == PlanKind::erk) {
    return std::make_unique<FixedMaskController>("random", erk_random_masks(layers, target_sparsity, seed));
  }
  if (plan_kind == PlanKind::uniform) {
    const DensityPlan plan = solve_uniform_plan(layers, 1.0 - target_sparsity);
    return std::make_unique<FixedMaskController>("uniform",
                                                 random_mask_from_plan(plan, layers, derive_seed(seed, "topology")));
  }
  throw InputError("fixed random topologies support erk and uniform plans only");
}

}  // namespace sparselab
