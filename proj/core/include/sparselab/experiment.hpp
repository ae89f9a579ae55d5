#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sparselab/config.hpp"
#include "sparselab/density.hpp"
#include "sparselab/pipelines.hpp"

namespace sparselab {

// Datasets as the training loop sees them, after the hardness regime and the
// data-ratio subsample.
struct PreparedData {
  Dataset train;
  Dataset test;
  std::size_t source_train_size = 0;
  std::vector<double> scores;  // EL2N scores of the source train set (el2n regime)
};

// Train and test split before any hardness transformation.
DatasetPair load_source_data(const ExperimentConfig& config);

// Mean EL2N over config.el2n_models dense models trained on `train` with the
// run's optimizer settings (for config.el2n_epochs epochs when nonzero).
std::vector<double> compute_el2n_scores(const ExperimentConfig& config, const Dataset& train);

PreparedData prepare_data(const ExperimentConfig& config);
// The test split only (cheap: no scoring models are trained).
Dataset prepare_test_data(const ExperimentConfig& config);

Model build_model(const ExperimentConfig& config, const Dataset& data);

// Optional callbacks forwarded to every training phase of the run.
struct RunObserver {
  std::function<void(const TrainContext&)> on_phase_start;
  std::function<void(const TrainContext&, const MetricsRecord&)> on_epoch_end;
};

struct RunResult {
  PipelineResult pipeline;
  std::vector<DensityRow> density;
  std::vector<LayerSpec> layers;
  std::optional<Model> model;
  std::size_t train_size = 0;
  std::filesystem::path run_dir;  // empty when config.output is empty

  const MetricsRecord& final_metrics() const { return pipeline.metrics.back(); }
};

// Runs the hardness pipeline and the method's training lifecycle on `data`.
// When config.output is set, writes manifest.cfg, metrics.csv, density.csv,
// flops.json, masks.bin and model.bin there.
RunResult run_experiment(const ExperimentConfig& config, const PreparedData& data,
                         const RunObserver* observer = nullptr);
RunResult run_experiment(const ExperimentConfig& config, const RunObserver* observer = nullptr);

// Columns: epoch,train_loss,train_acc,test_clean_acc,test_adv_acc,
// global_sparsity,cumulative_flops,wall_seconds. Absent values are empty.
void write_metrics_csv(std::ostream& os, std::span<const MetricsRecord> records, bool include_wall_time);
std::vector<MetricsRecord> read_metrics_csv(std::istream& is);

inline constexpr const char* kRunFiles[] = {"manifest.cfg", "metrics.csv", "density.csv",
                                            "flops.json",   "masks.bin",   "model.bin"};

}  // namespace sparselab
