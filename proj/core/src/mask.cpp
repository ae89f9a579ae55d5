#include "sparselab/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparselab/error.hpp"

namespace sparselab {

LayerMask::LayerMask(Shape dims, std::uint8_t fill) : dims_(std::move(dims)) {
  bits_.assign(shape_numel(dims_), fill ? 1 : 0);
}

LayerMask::LayerMask(Shape dims, std::vector<std::uint8_t> bits)
    : dims_(std::move(dims)), bits_(std::move(bits)) {
  if (shape_numel(dims_) != bits_.size()) {
    throw DimensionError("mask of dims " + shape_string(dims_) + " given " +
                         std::to_string(bits_.size()) + " bits");
  }
  for (auto& b : bits_) {
    if (b > 1) throw InputError("mask bits must be 0 or 1");
  }
}

std::size_t LayerMask::nonzero_count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double LayerMask::density() const noexcept {
  return bits_.empty() ? 0.0 : static_cast<double>(nonzero_count()) / static_cast<double>(bits_.size());
}

void LayerMask::apply(std::span<Scalar> values) const {
  if (values.size() != bits_.size()) throw DimensionError("mask/tensor size mismatch");
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (!bits_[i]) values[i] = Scalar{0};
  }
}

std::size_t total_size(const MaskSet& masks) {
  return std::accumulate(masks.begin(), masks.end(), std::size_t{0},
                         [](std::size_t acc, const LayerMask& m) { return acc + m.size(); });
}

std::size_t total_nonzeros(const MaskSet& masks) {
  return std::accumulate(masks.begin(), masks.end(), std::size_t{0},
                         [](std::size_t acc, const LayerMask& m) { return acc + m.nonzero_count(); });
}

double global_sparsity(const MaskSet& masks) {
  const std::size_t total = total_size(masks);
  if (total == 0) throw InputError("global_sparsity of an empty mask set");
  return 1.0 - static_cast<double>(total_nonzeros(masks)) / static_cast<double>(total);
}

MaskSet full_masks(std::span<const Tensor> weights) {
  MaskSet out;
  out.reserve(weights.size());
  for (const auto& w : weights) out.push_back(LayerMask::ones(w.dims()));
  return out;
}

namespace {

struct Candidate {
  Scalar score;
  std::uint32_t layer;
  std::uint32_t index;
};

// Higher score first; ties resolved toward the earlier position.
bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.layer != b.layer) return a.layer < b.layer;
  return a.index < b.index;
}

std::size_t keep_count(std::size_t total, double target_sparsity) {
  if (!(target_sparsity >= 0.0 && target_sparsity < 1.0)) {
    throw InputError("target sparsity must lie in [0, 1), got " + std::to_string(target_sparsity));
  }
  return static_cast<std::size_t>(std::llround((1.0 - target_sparsity) * static_cast<double>(total)));
}

}  // namespace

LayerMask top_k_mask(const Shape& dims, std::span<const Scalar> scores, std::size_t keep) {
  if (shape_numel(dims) != scores.size()) throw DimensionError("score/dims mismatch in top_k_mask");
  if (keep > scores.size()) throw InputError("top_k_mask budget exceeds layer size");
  std::vector<Candidate> cands(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    cands[i] = {scores[i], 0, static_cast<std::uint32_t>(i)};
  }
  LayerMask mask = LayerMask::zeros(dims);
  if (keep == 0) return mask;
  std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep - 1), cands.end(),
                   ranks_before);
  for (std::size_t i = 0; i < keep; ++i) mask.set(cands[i].index, true);
  return mask;
}

MaskSet global_top_k_mask(std::span<const Tensor> scores, double target_sparsity,
                          const MaskSet* eligible) {
  if (eligible && eligible->size() != scores.size()) throw DimensionError("eligible mask count mismatch");
  std::size_t total = 0;
  for (const auto& s : scores) total += s.numel();
  const std::size_t k = keep_count(total, target_sparsity);

  std::vector<Candidate> cands;
  cands.reserve(total);
  MaskSet out;
  out.reserve(scores.size());
  for (std::size_t l = 0; l < scores.size(); ++l) {
    const auto& s = scores[l];
    if (eligible && (*eligible)[l].dims() != s.dims()) throw DimensionError("eligible mask dims mismatch");
    out.push_back(LayerMask::zeros(s.dims()));
    for (std::size_t i = 0; i < s.numel(); ++i) {
      if (eligible && !(*eligible)[l][i]) continue;
      cands.push_back({s[i], static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(i)});
    }
  }
  if (cands.size() < k) {
    throw InputError("only " + std::to_string(cands.size()) + " eligible weights for a budget of " +
                     std::to_string(k));
  }
  if (k == 0) return out;
  std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k - 1), cands.end(),
                   ranks_before);
  for (std::size_t i = 0; i < k; ++i) out[cands[i].layer].set(cands[i].index, true);
  return out;
}

MaskSet global_magnitude_mask(std::span<const Tensor> weights, double target_sparsity,
                              const MaskSet* eligible) {
  std::vector<Tensor> magnitudes;
  magnitudes.reserve(weights.size());
  for (const auto& w : weights) {
    Tensor m(w.dims());
    for (std::size_t i = 0; i < w.numel(); ++i) m[i] = std::abs(w[i]);
    magnitudes.push_back(std::move(m));
  }
  return global_top_k_mask(magnitudes, target_sparsity, eligible);
}

}  // namespace sparselab
