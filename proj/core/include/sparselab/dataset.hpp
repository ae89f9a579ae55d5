#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sparselab/tensor.hpp"

namespace sparselab {

// Images [N,C,H,W] with pixels in [0,1] and integer labels in [0, classes).
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t classes = 0;
  std::string split = "train";

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }
  std::size_t image_numel() const { return images.numel() / images.dim(0); }

  // Throws InputError unless pixels lie in [0,1], labels are in range and N >= 1.
  void validate() const;

  Dataset select(std::span<const std::size_t> indices) const;
  Tensor gather_images(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

// Class-conditional blobs: each class owns a smooth random prototype; a
// sample of class y is (1 - lambda) * proto[y] + lambda * proto[other] plus
// pixel noise, clamped to [0,1], with lambda ~ U(0, overlap) drawn per sample.
// Larger overlap or noise makes classes harder to separate.
struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t per_class = 800;
  std::size_t channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  double noise_std = 0.1;
  double overlap = 0.4;
};

// Prototypes depend only on `seed`; samples on (seed, split, index), so train
// and test splits drawn with the same seed share their classes.
Dataset make_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const std::string& split = "train");

// Uniform random subset of round(ratio * N) samples without replacement, kept
// in original order; deterministic in `seed`.
Dataset subsample(const Dataset& data, double data_ratio, std::uint64_t seed);

// Keeps the ceil(keep_frac * N) highest-scoring samples (ties to the lower
// index), preserving original order. `scores[i]` belongs to sample i.
std::vector<std::size_t> hardest_indices(std::span<const double> scores, double keep_frac);
Dataset filter_hard(const Dataset& data, std::span<const double> scores, double keep_frac);

// Split files under `dir`: <split>_images.stns (f32 [N,C,H,W]) and
// <split>_labels.stns (u8 [N]).
void save_split(const std::filesystem::path& dir, const Dataset& data);
Dataset load_split(const std::filesystem::path& dir, const std::string& split, std::size_t classes = 0);

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// Loads both splits; the class count is one past the largest label seen.
DatasetPair load_dataset_dir(const std::filesystem::path& dir);
void save_dataset_dir(const std::filesystem::path& dir, const DatasetPair& data);

}  // namespace sparselab
