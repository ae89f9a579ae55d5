#include "sparselab/pipelines.hpp"

#include <algorithm>

#include "sparselab/error.hpp"
#include "sparselab/sparsifiers.hpp"

namespace sparselab {
namespace {

PhaseOptions phase_options(const PipelineOptions& options, FlopsPhase phase, std::size_t epoch_offset) {
  PhaseOptions p;
  p.phase = phase;
  p.epoch_offset = epoch_offset;
  p.seed = options.seed;
  p.test = options.test;
  p.train_attack = options.train_attack;
  p.eval_attack = options.eval_attack;
  p.on_phase_start = options.on_phase_start;
  p.on_epoch_end = options.on_epoch_end;
  return p;
}

void append(std::vector<MetricsRecord>& to, const std::vector<MetricsRecord>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

enum class Restart { initial, pretrained };

PipelineResult two_phase(Model& model, const Dataset& train, const PipelineOptions& options, Restart restart,
                         const std::function<MaskSet(const Model&)>& prune) {
  PipelineResult result;
  result.initial_params = snapshot_parameters(model);
  result.masks = full_masks(model.weights());

  NoSparsification dense;
  append(result.metrics, train_phase(model, result.masks, train, options.schedule, dense, result.ledger,
                                     phase_options(options, FlopsPhase::dense_pretrain, 0)));
  result.pretrained_params = snapshot_parameters(model);

  MaskSet pruned = prune(model);
  if (restart == Restart::initial) restore_parameters(model, result.initial_params);
  model.apply_masks(pruned);
  result.retrain_start_params = snapshot_parameters(model);

  FixedMaskController fixed("retrain", pruned);
  append(result.metrics, train_phase(model, result.masks, train, options.schedule, fixed, result.ledger,
                                     phase_options(options, FlopsPhase::retrain, options.schedule.epochs)));
  return result;
}

}  // namespace

std::vector<Tensor> snapshot_parameters(Model& model) {
  std::vector<Tensor> out;
  for (auto& [name, t] : model.named_parameters()) {
    Tensor copy(t->dims(), t->storage());
    out.push_back(std::move(copy));
  }
  return out;
}

void restore_parameters(Model& model, const std::vector<Tensor>& params) {
  auto named = model.named_parameters();
  if (named.size() != params.size()) throw DimensionError("parameter snapshot does not match the model");
  for (std::size_t i = 0; i < named.size(); ++i) {
    Tensor& t = *named[i].second;
    if (t.dims() != params[i].dims()) throw DimensionError("parameter snapshot dims mismatch for " + named[i].first);
    std::copy(params[i].values().begin(), params[i].values().end(), t.values().begin());
  }
}

PipelineResult single_phase_pipeline(Model& model, const Dataset& train, TrainingHooks& hooks,
                                     const PipelineOptions& options, FlopsPhase phase) {
  PipelineResult result;
  result.initial_params = snapshot_parameters(model);
  result.masks = full_masks(model.weights());
  result.metrics = train_phase(model, result.masks, train, options.schedule, hooks, result.ledger,
                               phase_options(options, phase, 0));
  return result;
}

PipelineResult lth_pipeline(Model& model, const Dataset& train, double target_sparsity,
                            const PipelineOptions& options) {
  return two_phase(model, train, options, Restart::initial, [&](const Model& m) {
    return global_magnitude_mask(m.weights(), target_sparsity);
  });
}

PipelineResult omp_pipeline(Model& model, const Dataset& train, double target_sparsity,
                            const PipelineOptions& options, const DensityPlan* plan_override) {
  return two_phase(model, train, options, Restart::pretrained, [&](const Model& m) {
    if (plan_override) return layerwise_magnitude_mask(m.weights(), *plan_override);
    return global_magnitude_mask(m.weights(), target_sparsity);
  });
}

}  // namespace sparselab
