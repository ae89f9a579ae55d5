#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sparselab/mask.hpp"
#include "sparselab/model.hpp"

namespace sparselab {

enum class PlanKind { uniform, er, erk, explicit_densities };

const char* to_string(PlanKind kind);

// Per-layer density budget. `densities` are the solver's real-valued targets;
// `nonzeros` are the integer allocations after rounding repair, which sum to
// exactly round(global_density * sum(d_l)).
struct DensityPlan {
  PlanKind kind = PlanKind::uniform;
  double global_density = 1.0;
  std::vector<double> densities;
  std::vector<std::size_t> param_counts;
  std::vector<std::size_t> nonzeros;

  double target_sparsity() const noexcept { return 1.0 - global_density; }
  std::size_t total_params() const noexcept;
  std::size_t total_nonzeros() const noexcept;
};

// Rounding repair: floor(density_l * d_l) per layer, then the remaining
// deficit handed out one element at a time in descending fractional
// remainder (ties to the earlier layer), capped at d_l.
std::vector<std::size_t> allocate_nonzeros(std::span<const double> densities,
                                           std::span<const std::size_t> param_counts, double global_density);

// Erdős–Rényi(-Kernel) raw scale of a layer:
//   conv:   (n_in + n_out + kh + kw) / (n_in * n_out * kh * kw)
//   linear: (n_in + n_out) / (n_in * n_out)
double erk_raw_scale(const LayerSpec& layer);

// density_l = min(1, c * raw_l) with c chosen so sum(density_l * d_l) equals
// density * sum(d_l); saturated layers are frozen at 1 and c is re-solved over
// the remainder until no new layer saturates. Throws InputError unless
// 0 < density <= 1.
DensityPlan solve_erk_plan(std::span<const LayerSpec> layers, double density);

// Every layer at `density` before rounding repair.
DensityPlan solve_uniform_plan(std::span<const LayerSpec> layers, double density);

// Caller-chosen per-layer densities; the global budget follows from them.
DensityPlan make_explicit_plan(std::span<const LayerSpec> layers, std::span<const double> densities);

// Places each layer's allocated nonzeros uniformly at random without
// replacement; deterministic in `seed`.
MaskSet random_mask_from_plan(const DensityPlan& plan, std::span<const LayerSpec> layers, std::uint64_t seed);

// Per layer, keeps the plan's allocated count of largest |w| (ties to the
// lower index).
MaskSet layerwise_magnitude_mask(std::span<const Tensor> weights, const DensityPlan& plan);

struct DensityRow {
  std::size_t index = 0;
  std::string name;
  LayerKind kind = LayerKind::linear;
  std::size_t params = 0;
  std::size_t nonzeros = 0;
  double density = 0.0;
};

std::vector<DensityRow> density_report(const MaskSet& masks, std::span<const LayerSpec> layers);

// CSV with header `layer,kind,params,nonzeros,density`, densities to 6 decimals.
void write_density_csv(std::ostream& os, std::span<const DensityRow> rows);
std::vector<DensityRow> read_density_csv(std::istream& is);

}  // namespace sparselab
