#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sparselab/dataset.hpp"
#include "sparselab/flops.hpp"
#include "sparselab/mask.hpp"
#include "sparselab/model.hpp"
#include "sparselab/optim.hpp"
#include "sparselab/pgd.hpp"

namespace sparselab {

struct TrainSchedule {
  std::size_t epochs = 40;
  std::size_t batch_size = 128;
  SgdOptions sgd;
  std::vector<std::size_t> milestones;  // epochs (0-based) where lr is multiplied by lr_factor
  double lr_factor = 0.1;
};

// Everything a hook may look at while one training phase runs. Hooks may
// mutate `masks` and, for rewinding methods, the model's parameters.
struct TrainContext {
  Model& model;
  MaskSet& masks;
  const Dataset& train;
  const TrainSchedule& schedule;
  FlopsLedger& ledger;
  FlopsPhase phase;
  std::uint64_t seed;
  std::size_t epoch = 0;      // phase-local
  std::size_t iteration = 0;  // phase-local optimizer steps so far
};

// Lifecycle callbacks around the common training loop.
class TrainingHooks {
 public:
  virtual ~TrainingHooks() = default;
  virtual std::string name() const = 0;
  virtual void on_init(TrainContext&) {}
  virtual void on_epoch_start(TrainContext&, std::size_t /*epoch*/) {}
  virtual void after_optimizer_step(TrainContext&, std::size_t /*iteration*/) {}
  virtual void on_train_end(TrainContext&) {}
};

// Inert hooks: dense training (or retraining under already-fixed masks).
class NoSparsification final : public TrainingHooks {
 public:
  std::string name() const override { return "dense"; }
};

struct MetricsRecord {
  std::size_t epoch = 0;  // 1-based and cumulative across the phases of a run
  FlopsPhase phase = FlopsPhase::sparse_train;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_clean_acc = 0.0;
  std::optional<double> test_adv_acc;
  double global_sparsity = 0.0;
  double cumulative_flops = 0.0;
  double wall_seconds = 0.0;
};

struct PhaseOptions {
  FlopsPhase phase = FlopsPhase::sparse_train;
  std::size_t epoch_offset = 0;         // added to reported epoch numbers
  std::uint64_t seed = 0;
  const Dataset* test = nullptr;        // evaluated after every epoch when set
  std::optional<AttackConfig> train_attack;  // adversarial training when set
  std::optional<AttackConfig> eval_attack;   // adversarial test accuracy when set
  // After on_init, before the first epoch.
  std::function<void(const TrainContext&)> on_phase_start;
  // After every epoch's metrics are recorded.
  std::function<void(const TrainContext&, const MetricsRecord&)> on_epoch_end;
};

// Runs schedule.epochs epochs of minibatch SGD under `hooks`. The optimizer is
// fresh and the lr schedule restarts for every phase; shuffling depends on
// (seed, phase-local epoch) only.
std::vector<MetricsRecord> train_phase(Model& model, MaskSet& masks, const Dataset& train,
                                       const TrainSchedule& schedule, TrainingHooks& hooks, FlopsLedger& ledger,
                                       const PhaseOptions& options);

}  // namespace sparselab
