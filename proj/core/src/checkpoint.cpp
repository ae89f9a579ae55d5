#include "sparselab/checkpoint.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "sparselab/error.hpp"
#include "sparselab/tensor_io.hpp"

namespace sparselab {
namespace {

constexpr std::array<char, 4> kMaskMagic = {'S', 'M', 'S', 'K'};
constexpr std::uint8_t kMaskVersion = 1;

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    char c;
    if (!is.get(c)) throw IoError("mask file truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

void save_model_file(const std::filesystem::path& path, Model& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  auto params = model.named_parameters();
  std::string names;
  for (const auto& [name, t] : params) names += name + "\n";
  Tensor manifest({names.size()});
  for (std::size_t i = 0; i < names.size(); ++i) manifest[i] = static_cast<unsigned char>(names[i]);
  write_tensor(os, manifest, TensorDtype::u8);
  for (const auto& [name, t] : params) write_tensor(os, *t, TensorDtype::f32);
  if (!os) throw IoError("failed writing " + path.string());
}

void load_model_file(const std::filesystem::path& path, Model& model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  TensorDtype dtype{};
  const Tensor manifest = read_tensor(is, &dtype);
  if (dtype != TensorDtype::u8) throw IoError(path.string() + ": missing name manifest");
  std::string names;
  for (Scalar v : manifest.values()) names.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  std::istringstream ns(names);
  auto params = model.named_parameters();
  std::string name;
  for (const auto& [expected, t] : params) {
    if (!std::getline(ns, name) || name != expected) {
      throw IoError(path.string() + ": parameter '" + expected + "' not found where expected");
    }
    Tensor loaded = read_tensor(is, &dtype);
    if (dtype != TensorDtype::f32 || loaded.dims() != t->dims()) {
      throw IoError(path.string() + ": parameter '" + expected + "' has dims " + shape_string(loaded.dims()));
    }
    std::copy(loaded.values().begin(), loaded.values().end(), t->values().begin());
  }
  if (std::getline(ns, name)) throw IoError(path.string() + ": extra parameter '" + name + "'");
}

void write_mask_file(const std::filesystem::path& path, const MaskFile& file) {
  if (file.names.size() != file.masks.size()) throw InputError("mask file: one name per mask required");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMaskMagic.data(), kMaskMagic.size());
  os.put(static_cast<char>(kMaskVersion));
  put_le(os, file.masks.size(), 4);
  for (std::size_t l = 0; l < file.masks.size(); ++l) {
    const auto& name = file.names[l];
    const auto& mask = file.masks[l];
    if (name.size() > 0xffff) throw IoError("mask name too long");
    if (mask.dims().size() > 255) throw IoError("mask rank too large");
    put_le(os, name.size(), 2);
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(mask.dims().size()));
    for (auto d : mask.dims()) put_le(os, d, 4);
    put_le(os, mask.nonzero_count(), 8);
    std::vector<char> packed((mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
    }
    os.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

MaskFile read_mask_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMaskMagic) throw IoError(path.string() + ": bad mask magic");
  if (get_le(is, 1) != kMaskVersion) throw IoError(path.string() + ": unsupported mask file version");
  const auto layers = get_le(is, 4);
  MaskFile file;
  for (std::uint64_t l = 0; l < layers; ++l) {
    std::string name(get_le(is, 2), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) throw IoError("mask file truncated");
    Shape dims(get_le(is, 1));
    for (auto& d : dims) d = get_le(is, 4);
    const auto nonzeros = get_le(is, 8);
    const std::size_t n = shape_numel(dims);
    std::vector<char> packed((n + 7) / 8);
    if (!is.read(packed.data(), static_cast<std::streamsize>(packed.size()))) throw IoError("mask file truncated");
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1;
    for (std::size_t i = n; i < packed.size() * 8; ++i) {
      if ((static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1) throw IoError("mask file: padding bits set");
    }
    LayerMask mask(dims, std::move(bits));
    if (mask.nonzero_count() != nonzeros) throw IoError("mask file: nonzero count mismatch for '" + name + "'");
    file.names.push_back(std::move(name));
    file.masks.push_back(std::move(mask));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes");
  return file;
}

}  // namespace sparselab
