#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "sparselab/tensor.hpp"

namespace sparselab {

// Tensor container record:
//   "STNS" | version u8 = 1 | dtype u8 | ndim u8 | ndim x u32 LE dims | payload
// Payload is row-major, little-endian 32-bit floats (dtype 0) or unsigned
// bytes (dtype 1). Engine values are narrowed to float on write, so a round
// trip is bitwise exact for float-representable tensors.
enum class TensorDtype : std::uint8_t { f32 = 0, u8 = 1 };

void write_tensor(std::ostream& os, const Tensor& tensor, TensorDtype dtype = TensorDtype::f32);
Tensor read_tensor(std::istream& is, TensorDtype* dtype = nullptr);

void save_tensor_file(const std::filesystem::path& path, const Tensor& tensor,
                      TensorDtype dtype = TensorDtype::f32);
Tensor load_tensor_file(const std::filesystem::path& path, TensorDtype* dtype = nullptr);

// Rounds every element to the nearest float (what a save/load cycle yields).
Tensor to_f32_precision(const Tensor& tensor);

}  // namespace sparselab
