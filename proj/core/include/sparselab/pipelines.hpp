#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sparselab/density.hpp"
#include "sparselab/trainer.hpp"

namespace sparselab {

struct PipelineOptions {
  TrainSchedule schedule;
  std::uint64_t seed = 0;
  const Dataset* test = nullptr;
  std::optional<AttackConfig> train_attack;
  std::optional<AttackConfig> eval_attack;
  std::function<void(const TrainContext&)> on_phase_start;
  std::function<void(const TrainContext&, const MetricsRecord&)> on_epoch_end;
};

struct PipelineResult {
  MaskSet masks;
  FlopsLedger ledger;
  std::vector<MetricsRecord> metrics;
  // Parameter snapshots in Model::named_parameters order, taken before training, at the end of the dense phase and at the start of
  // the retrain phase. Only the two-phase pipelines fill the last two.
  std::vector<Tensor> initial_params;
  std::vector<Tensor> pretrained_params;
  std::vector<Tensor> retrain_start_params;
};

std::vector<Tensor> snapshot_parameters(Model& model);
void restore_parameters(Model& model, const std::vector<Tensor>& params);

// One training run under `hooks`, all FLOPs booked to `phase`.
PipelineResult single_phase_pipeline(Model& model, const Dataset& train, TrainingHooks& hooks,
                                     const PipelineOptions& options, FlopsPhase phase = FlopsPhase::sparse_train);

// Dense training, one-shot global magnitude pruning at s, rewind the surviving
// weights (and all biases) to their initial values, retrain with fixed masks.
PipelineResult lth_pipeline(Model& model, const Dataset& train, double target_sparsity,
                            const PipelineOptions& options);

// Dense training, one-shot magnitude pruning (global, or per layer under
// `plan_override`), retrain from the pre-trained weights with fixed masks.
PipelineResult omp_pipeline(Model& model, const Dataset& train, double target_sparsity,
                            const PipelineOptions& options, const DensityPlan* plan_override = nullptr);

}  // namespace sparselab
