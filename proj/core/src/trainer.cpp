#include "sparselab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

std::vector<MetricsRecord> train_phase(Model& model, MaskSet& masks, const Dataset& train,
                                       const TrainSchedule& schedule, TrainingHooks& hooks, FlopsLedger& ledger,
                                       const PhaseOptions& options) {
  if (schedule.epochs == 0) throw InputError("training needs at least one epoch");
  if (schedule.batch_size == 0) throw InputError("batch size must be positive");
  if (masks.size() != model.layer_count()) throw DimensionError("mask count != layer count");

  const auto started = std::chrono::steady_clock::now();
  TrainContext ctx{model, masks, train, schedule, ledger, options.phase, options.seed};
  hooks.on_init(ctx);
  model.apply_masks(masks);
  if (options.on_phase_start) options.on_phase_start(ctx);

  SgdOptimizer optimizer(schedule.sgd);
  const StepLrSchedule lr(schedule.sgd.learning_rate, schedule.milestones, schedule.lr_factor);
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  const std::uint64_t shuffle_seed = derive_seed(options.seed, "shuffle");
  const std::uint64_t attack_seed = derive_seed(options.seed, "train-attack");
  const std::uint64_t eval_seed = derive_seed(options.seed, "eval-attack");

  std::vector<MetricsRecord> records;
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    ctx.epoch = epoch;
    hooks.on_epoch_start(ctx, epoch);
    model.apply_masks(masks);
    optimizer.set_learning_rate(lr.lr(epoch));

    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(shuffle_seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += schedule.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(schedule.batch_size, n - start));
      const Tensor x = train.gather_images(batch);
      const std::vector<int> y = train.gather_labels(batch);
      double step_flops = flops_training_step(model.spec(), &masks, batch.size());
      StepResult step;
      if (options.train_attack) {
        step = adversarial_train_step(model, &masks, optimizer, x, y, *options.train_attack,
                                      derive_seed(attack_seed, ctx.iteration));
        // Each attack step is a forward pass plus a backward pass to the input.
        step_flops += 2.0 * static_cast<double>(options.train_attack->steps) *
                      flops_forward(model.spec(), &masks, batch.size());
      } else {
        step = train_step(model, &masks, optimizer, x, y);
      }
      ledger.add(options.phase, step_flops);
      loss_sum += step.loss * static_cast<double>(batch.size());
      correct += step.correct;
      ++ctx.iteration;
      hooks.after_optimizer_step(ctx, ctx.iteration);
    }
    if (epoch + 1 == schedule.epochs) {
      hooks.on_train_end(ctx);
      model.apply_masks(masks);
    }

    MetricsRecord rec;
    rec.epoch = options.epoch_offset + epoch + 1;
    rec.phase = options.phase;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    if (options.test) {
      const EvalResult eval =
          evaluate(model, &masks, *options.test, options.eval_attack, derive_seed(eval_seed, epoch));
      rec.test_clean_acc = eval.clean_acc;
      rec.test_adv_acc = eval.adv_acc;
    }
    rec.global_sparsity = global_sparsity(masks);
    rec.cumulative_flops = ledger.total();
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    records.push_back(rec);
    if (options.on_epoch_end) options.on_epoch_end(ctx, rec);
  }
  return records;
}

}  // namespace sparselab
