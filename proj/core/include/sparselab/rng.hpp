#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sparselab {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a stream tag, so
// that e.g. weight init and minibatch shuffling never share a generator.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

inline Rng make_rng(std::uint64_t base, std::string_view stream) {
  return Rng(derive_seed(base, stream));
}

}  // namespace sparselab
