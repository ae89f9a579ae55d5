#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparselab/config.hpp"

namespace sparselab {

// Axis values left empty keep the base config's value.
struct SweepAxes {
  std::vector<double> sparsity;
  std::vector<double> data_ratio;
  std::vector<int> severity;
};

struct SweepCell {
  double sparsity = 0.0;
  double data_ratio = 1.0;
  int severity = 0;
  std::uint64_t seed = 0;
  std::string name;  // run directory name under the sweep output
};

// Cartesian product axis values x seeds, seeds varying fastest.
std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const SweepAxes& axes,
                                   const std::vector<std::uint64_t>& seeds);
ExperimentConfig cell_config(const ExperimentConfig& base, const SweepCell& cell,
                             const std::filesystem::path& sweep_dir);

struct AggregateRow {
  double sparsity = 0.0;
  double data_ratio = 1.0;
  int severity = 0;
  std::size_t runs = 0;
  double clean_mean = 0.0;
  double clean_std = 0.0;  // sample standard deviation, 0 for a single run
  std::optional<double> adv_mean;
  std::optional<double> adv_std;
  double sparsity_mean = 0.0;
  double flops_mean = 0.0;
  double params_mean = 0.0;
};

struct CellOutcome {
  SweepCell cell;
  double clean_acc = 0.0;
  std::optional<double> adv_acc;
  double global_sparsity = 0.0;
  double total_flops = 0.0;
  double final_params = 0.0;
};

// Groups outcomes by (sparsity, data_ratio, severity) in first-seen order.
std::vector<AggregateRow> aggregate(const std::vector<CellOutcome>& outcomes);

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);
// Mean clean accuracy, one row per sparsity and one column per data ratio.
void write_heatmap_csv(std::ostream& os, const std::vector<AggregateRow>& rows);

struct SweepResult {
  std::vector<CellOutcome> outcomes;
  std::vector<AggregateRow> rows;
};

// Every cell runs run_experiment into <base.output>/<cell.name>; with jobs > 1
// cells run in up to `jobs` forked worker processes. Writes aggregate.csv and,
// when both the sparsity and data_ratio axes are given (and severity has at
// most one value), heatmap.csv. A failed cell fails the sweep.
SweepResult run_sweep(const ExperimentConfig& base, const SweepAxes& axes, const std::vector<std::uint64_t>& seeds,
                      std::size_t jobs = 1);

// Final metrics row and ledger of a finished run directory.
CellOutcome read_cell_outcome(const std::filesystem::path& run_dir, const SweepCell& cell);

}  // namespace sparselab
