#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparselab/dataset.hpp"

namespace sparselab {

enum class CorruptionKind { gaussian_noise, impulse_noise, defocus_blur };

const char* to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(const std::string& name);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = 1;  // 1..6
  std::uint64_t seed = 0;
};

inline constexpr int kMaxSeverity = 6;

// Severity ladders (index = severity - 1); monotone in severity.
double gaussian_sigma(int severity);     // 0.04 0.08 0.12 0.18 0.26 0.38
double impulse_fraction(int severity);   // 0.01 0.02 0.03 0.05 0.07 0.10
int defocus_radius(int severity);        // 1 1 2 3 4 5

// Normalized disk of radius r: (2r+1)^2 weights, nonzero where i^2 + j^2 <= r^2.
std::vector<double> disk_kernel(int radius);

// Applies the corruption to every image. Each sample draws from its own
// stream derived from (seed, sample index); labels are copied unchanged.
Dataset corrupt(const Dataset& data, const CorruptionSpec& spec);

}  // namespace sparselab
