#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sparselab/tensor.hpp"

namespace sparselab {

// Binary mask over one weight tensor, one byte per element (0 or 1).
class LayerMask {
 public:
  LayerMask() = default;
  explicit LayerMask(Shape dims, std::uint8_t fill = 1);
  LayerMask(Shape dims, std::vector<std::uint8_t> bits);

  static LayerMask ones(const Shape& dims) { return LayerMask(dims, 1); }
  static LayerMask zeros(const Shape& dims) { return LayerMask(dims, 0); }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return bits_.size(); }
  std::size_t nonzero_count() const noexcept;
  double density() const noexcept;

  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool on) { bits_[i] = on ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  // Zeroes every masked-out element of `values` in place.
  void apply(std::span<Scalar> values) const;

  friend bool operator==(const LayerMask&, const LayerMask&) = default;

 private:
  Shape dims_;
  std::vector<std::uint8_t> bits_;
};

// One mask per maskable layer, in network order.
using MaskSet = std::vector<LayerMask>;

std::size_t total_size(const MaskSet& masks);
std::size_t total_nonzeros(const MaskSet& masks);

// s = 1 - sum(nonzeros) / sum(d_l)
double global_sparsity(const MaskSet& masks);

MaskSet full_masks(std::span<const Tensor> weights);

// Keeps the k = round((1 - s) * sum(d_l)) largest |w| across all layers; ties
// go to the earlier (layer, flat index) position. When `eligible` is given,
// positions it masks out are never kept (used to make pruning monotone).
// Throws InputError for s outside [0, 1) or when fewer than k positions are
// eligible.
MaskSet global_magnitude_mask(std::span<const Tensor> weights, double target_sparsity,
                              const MaskSet* eligible = nullptr);

// Keeps the `keep` largest entries of `scores` in one layer (same tie rule).
LayerMask top_k_mask(const Shape& dims, std::span<const Scalar> scores, std::size_t keep);

// Global top-k over arbitrary per-element scores (k as in global_magnitude_mask).
MaskSet global_top_k_mask(std::span<const Tensor> scores, double target_sparsity,
                          const MaskSet* eligible = nullptr);

}  // namespace sparselab
