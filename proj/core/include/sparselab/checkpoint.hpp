#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sparselab/mask.hpp"
#include "sparselab/model.hpp"

namespace sparselab {

// Model checkpoint: a u8 tensor record holding the newline-separated parameter
// names, followed by one f32 tensor record per parameter in that order.
void save_model_file(const std::filesystem::path& path, Model& model);
// Loads into a model of matching architecture; names and dims must agree.
void load_model_file(const std::filesystem::path& path, Model& model);

struct MaskFile {
  std::vector<std::string> names;
  MaskSet masks;
};

// Mask checkpoint:
//   "SMSK" | version u8 = 1 | layer count u32
//   per layer: name length u16 | name | ndim u8 | ndim x u32 dims |
//              nonzero count u64 | ceil(d/8) bytes of bits, LSB first
// All integers little-endian.
void write_mask_file(const std::filesystem::path& path, const MaskFile& file);
MaskFile read_mask_file(const std::filesystem::path& path);

}  // namespace sparselab
