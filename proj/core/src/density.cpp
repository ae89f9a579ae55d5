#include "sparselab/density.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "sparselab/error.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

const char* to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::uniform: return "uniform";
    case PlanKind::er: return "er";
    case PlanKind::erk: return "erk";
    case PlanKind::explicit_densities: return "explicit";
  }
  return "?";
}

std::size_t DensityPlan::total_params() const noexcept {
  return std::accumulate(param_counts.begin(), param_counts.end(), std::size_t{0});
}

std::size_t DensityPlan::total_nonzeros() const noexcept {
  return std::accumulate(nonzeros.begin(), nonzeros.end(), std::size_t{0});
}

std::vector<std::size_t> allocate_nonzeros(std::span<const double> densities,
                                           std::span<const std::size_t> param_counts, double global_density) {
  if (densities.size() != param_counts.size()) throw DimensionError("density/param count length mismatch");
  const std::size_t total = std::accumulate(param_counts.begin(), param_counts.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(global_density * static_cast<double>(total)));

  std::vector<std::size_t> alloc(densities.size());
  std::vector<double> remainder(densities.size());
  std::size_t assigned = 0;
  for (std::size_t l = 0; l < densities.size(); ++l) {
    const double exact = std::clamp(densities[l], 0.0, 1.0) * static_cast<double>(param_counts[l]);
    alloc[l] = std::min(param_counts[l], static_cast<std::size_t>(std::floor(exact)));
    remainder[l] = exact - static_cast<double>(alloc[l]);
    assigned += alloc[l];
  }
  if (assigned > target) {
    throw InputError("rounding repair: floor allocation exceeds the global budget");
  }

  std::vector<std::size_t> order(densities.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  std::size_t deficit = target - assigned;
  while (deficit > 0) {
    bool progressed = false;
    for (std::size_t l : order) {
      if (deficit == 0) break;
      if (alloc[l] < param_counts[l]) {
        ++alloc[l];
        --deficit;
        progressed = true;
      }
    }
    if (!progressed) throw InputError("rounding repair: budget exceeds total capacity");
  }
  return alloc;
}

double erk_raw_scale(const LayerSpec& layer) {
  const auto n_in = static_cast<double>(layer.fan_in);
  const auto n_out = static_cast<double>(layer.fan_out);
  if (layer.kind == LayerKind::linear) return (n_in + n_out) / (n_in * n_out);
  const auto kh = static_cast<double>(layer.kernel_h);
  const auto kw = static_cast<double>(layer.kernel_w);
  return (n_in + n_out + kh + kw) / (n_in * n_out * kh * kw);
}

namespace {

void check_density(double density) {
  if (!(density > 0.0 && density <= 1.0)) {
    throw InputError("density must lie in (0, 1], got " + std::to_string(density));
  }
}

DensityPlan finish_plan(PlanKind kind, std::span<const LayerSpec> layers, std::vector<double> densities,
                        double global_density) {
  DensityPlan plan;
  plan.kind = kind;
  plan.global_density = global_density;
  plan.densities = std::move(densities);
  for (const auto& l : layers) plan.param_counts.push_back(l.param_count());
  plan.nonzeros = allocate_nonzeros(plan.densities, plan.param_counts, global_density);
  return plan;
}

}  // namespace

DensityPlan solve_erk_plan(std::span<const LayerSpec> layers, double density) {
  check_density(density);
  if (layers.empty()) throw InputError("ERK plan over no layers");
  const std::size_t n = layers.size();
  std::vector<double> raw(n), params(n);
  double total = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    raw[l] = erk_raw_scale(layers[l]);
    params[l] = static_cast<double>(layers[l].param_count());
    total += params[l];
  }

  std::vector<bool> saturated(n, false);
  double scale = 0.0;
  if (density < 1.0) {
    for (;;) {
      double budget = density * total;
      double weighted = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        if (saturated[l]) {
          budget -= params[l];
        } else {
          weighted += raw[l] * params[l];
        }
      }
      if (weighted <= 0.0) break;
      scale = budget / weighted;
      bool changed = false;
      for (std::size_t l = 0; l < n; ++l) {
        if (!saturated[l] && scale * raw[l] > 1.0) {
          saturated[l] = true;
          changed = true;
        }
      }
      if (!changed) break;
    }
  }

  std::vector<double> densities(n, 1.0);
  if (density < 1.0) {
    for (std::size_t l = 0; l < n; ++l) {
      if (!saturated[l]) densities[l] = std::min(1.0, scale * raw[l]);
    }
  }
  return finish_plan(PlanKind::erk, layers, std::move(densities), density);
}

DensityPlan solve_uniform_plan(std::span<const LayerSpec> layers, double density) {
  check_density(density);
  if (layers.empty()) throw InputError("uniform plan over no layers");
  return finish_plan(PlanKind::uniform, layers, std::vector<double>(layers.size(), density), density);
}

DensityPlan make_explicit_plan(std::span<const LayerSpec> layers, std::span<const double> densities) {
  if (layers.size() != densities.size()) throw DimensionError("explicit plan: one density per layer required");
  double kept = 0.0, total = 0.0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!(densities[l] >= 0.0 && densities[l] <= 1.0)) throw InputError("explicit plan density outside [0, 1]");
    kept += densities[l] * static_cast<double>(layers[l].param_count());
    total += static_cast<double>(layers[l].param_count());
  }
  return finish_plan(PlanKind::explicit_densities, layers, std::vector<double>(densities.begin(), densities.end()),
                     kept / total);
}

MaskSet random_mask_from_plan(const DensityPlan& plan, std::span<const LayerSpec> layers, std::uint64_t seed) {
  if (plan.nonzeros.size() != layers.size()) throw DimensionError("plan/layer count mismatch");
  MaskSet masks;
  masks.reserve(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t d = layers[l].param_count();
    const std::size_t keep = plan.nonzeros[l];
    if (keep > d) throw InputError("plan allocates more nonzeros than the layer holds");
    LayerMask mask = LayerMask::zeros(layers[l].weight_dims());
    // Partial Fisher-Yates: the first `keep` slots of the permutation.
    Rng rng(derive_seed(derive_seed(seed, "random-mask"), l));
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < keep; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(perm[i], perm[pick(rng)]);
      mask.set(perm[i], true);
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

MaskSet layerwise_magnitude_mask(std::span<const Tensor> weights, const DensityPlan& plan) {
  if (plan.nonzeros.size() != weights.size()) throw DimensionError("plan/layer count mismatch");
  MaskSet masks;
  masks.reserve(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::vector<Scalar> mag(weights[l].numel());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(weights[l][i]);
    masks.push_back(top_k_mask(weights[l].dims(), mag, plan.nonzeros[l]));
  }
  return masks;
}

std::vector<DensityRow> density_report(const MaskSet& masks, std::span<const LayerSpec> layers) {
  if (masks.size() != layers.size()) throw DimensionError("mask/layer count mismatch in density report");
  std::vector<DensityRow> rows;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (masks[l].size() != layers[l].param_count()) throw DimensionError("mask size disagrees with layer '" + layers[l].name + "'");
    DensityRow row;
    row.index = l;
    row.name = layers[l].name;
    row.kind = layers[l].kind;
    row.params = masks[l].size();
    row.nonzeros = masks[l].nonzero_count();
    row.density = masks[l].density();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_density_csv(std::ostream& os, std::span<const DensityRow> rows) {
  os << "layer,kind,params,nonzeros,density\n";
  for (const auto& r : rows) {
    os << r.name << ',' << to_string(r.kind) << ',' << r.params << ',' << r.nonzeros << ',' << std::fixed
       << std::setprecision(6) << r.density << '\n';
  }
}

std::vector<DensityRow> read_density_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "layer,kind,params,nonzeros,density") {
    throw IoError("density CSV: unexpected header");
  }
  std::vector<DensityRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    DensityRow row;
    std::string kind, params, nonzeros, density;
    if (!std::getline(ls, row.name, ',') || !std::getline(ls, kind, ',') || !std::getline(ls, params, ',') ||
        !std::getline(ls, nonzeros, ',') || !std::getline(ls, density)) {
      throw IoError("density CSV: malformed row '" + line + "'");
    }
    row.index = rows.size();
    row.kind = kind == "conv" ? LayerKind::conv : LayerKind::linear;
    row.params = std::stoul(params);
    row.nonzeros = std::stoul(nonzeros);
    row.density = std::stod(density);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sparselab
