#include "sparselab/corruption.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {
namespace {

constexpr std::array<double, kMaxSeverity> kGaussianSigma = {0.04, 0.08, 0.12, 0.18, 0.26, 0.38};
constexpr std::array<double, kMaxSeverity> kImpulseFraction = {0.01, 0.02, 0.03, 0.05, 0.07, 0.10};
constexpr std::array<int, kMaxSeverity> kDefocusRadius = {1, 1, 2, 3, 4, 5};

std::size_t severity_index(int severity) {
  if (severity < 1 || severity > kMaxSeverity) {
    throw InputError("corruption severity must lie in [1, 6], got " + std::to_string(severity));
  }
  return static_cast<std::size_t>(severity - 1);
}

// Mirror indexing without repeating the edge sample (… 2 1 | 0 1 2 … n-1 | n-2 …).
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

const char* to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::impulse_noise: return "impulse_noise";
    case CorruptionKind::defocus_blur: return "defocus_blur";
  }
  return "?";
}

CorruptionKind parse_corruption_kind(const std::string& name) {
  if (name == "gaussian_noise") return CorruptionKind::gaussian_noise;
  if (name == "impulse_noise") return CorruptionKind::impulse_noise;
  if (name == "defocus_blur") return CorruptionKind::defocus_blur;
  throw InputError("unknown corruption '" + name + "'");
}

double gaussian_sigma(int severity) { return kGaussianSigma[severity_index(severity)]; }
double impulse_fraction(int severity) { return kImpulseFraction[severity_index(severity)]; }
int defocus_radius(int severity) { return kDefocusRadius[severity_index(severity)]; }

std::vector<double> disk_kernel(int radius) {
  if (radius < 0) throw InputError("disk radius must be nonnegative");
  const int side = 2 * radius + 1;
  std::vector<double> k(static_cast<std::size_t>(side * side), 0.0);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      if (i * i + j * j <= radius * radius) {
        k[static_cast<std::size_t>((i + radius) * side + (j + radius))] = 1.0;
        sum += 1.0;
      }
    }
  }
  for (auto& v : k) v /= sum;
  return k;
}

Dataset corrupt(const Dataset& data, const CorruptionSpec& spec) {
  const std::size_t sev = severity_index(spec.severity);
  Dataset out = data;
  const std::size_t per = data.image_numel();
  const auto h = static_cast<std::ptrdiff_t>(data.height());
  const auto w = static_cast<std::ptrdiff_t>(data.width());
  const std::size_t plane = static_cast<std::size_t>(h * w);
  const std::uint64_t base = derive_seed(spec.seed, std::string("corrupt-") + to_string(spec.kind));

  std::vector<double> kernel;
  int radius = 0;
  if (spec.kind == CorruptionKind::defocus_blur) {
    radius = kDefocusRadius[sev];
    kernel = disk_kernel(radius);
  }

  for (std::size_t n = 0; n < data.size(); ++n) {
    Rng rng(derive_seed(base, n));
    const Scalar* src = data.images.data() + n * per;
    Scalar* dst = out.images.data() + n * per;
    switch (spec.kind) {
      case CorruptionKind::gaussian_noise: {
        std::normal_distribution<double> noise(0.0, kGaussianSigma[sev]);
        for (std::size_t k = 0; k < per; ++k) {
          dst[k] = static_cast<Scalar>(std::clamp(static_cast<double>(src[k]) + noise(rng), 0.0, 1.0));
        }
        break;
      }
      case CorruptionKind::impulse_noise: {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double p = kImpulseFraction[sev];
        for (std::size_t k = 0; k < per; ++k) {
          const double hit = u(rng);
          const double salt = u(rng);
          dst[k] = hit < p ? (salt < 0.5 ? Scalar{0} : Scalar{1}) : src[k];
        }
        break;
      }
      case CorruptionKind::defocus_blur: {
        const std::ptrdiff_t side = 2 * radius + 1;
        for (std::size_t ch = 0; ch < data.channels(); ++ch) {
          const Scalar* sp = src + ch * plane;
          Scalar* dp = dst + ch * plane;
          for (std::ptrdiff_t r = 0; r < h; ++r) {
            for (std::ptrdiff_t c = 0; c < w; ++c) {
              double acc = 0.0;
              for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
                  const double kv = kernel[static_cast<std::size_t>((i + radius) * side + (j + radius))];
                  if (kv == 0.0) continue;
                  acc += kv * static_cast<double>(sp[reflect(r + i, h) * w + reflect(c + j, w)]);
                }
              }
              dp[r * w + c] = static_cast<Scalar>(std::clamp(acc, 0.0, 1.0));
            }
          }
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace sparselab
