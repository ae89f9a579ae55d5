#include "sparselab/tensor_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "sparselab/error.hpp"

namespace sparselab {
namespace {

constexpr std::array<char, 4> kMagic = {'S', 'T', 'N', 'S'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("tensor record truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint8_t get_u8(std::istream& is) {
  char c;
  if (!is.get(c)) throw IoError("tensor record truncated");
  return static_cast<std::uint8_t>(c);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& tensor, TensorDtype dtype) {
  if (tensor.rank() == 0 || tensor.rank() > 255) throw IoError("tensor rank not representable");
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(dtype));
  os.put(static_cast<char>(tensor.rank()));
  for (auto d : tensor.dims()) {
    if (d > 0xffffffffULL) throw IoError("tensor dim exceeds 32 bits");
    put_u32(os, static_cast<std::uint32_t>(d));
  }
  if (dtype == TensorDtype::f32) {
    for (Scalar v : tensor.values()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else if (dtype == TensorDtype::u8) {
    for (Scalar v : tensor.values()) {
      if (!(v >= 0 && v <= 255) || std::floor(v) != v) throw InputError("u8 tensor element is not an integer in [0, 255]");
      os.put(static_cast<char>(static_cast<std::uint8_t>(v)));
    }
  } else {
    throw IoError("unknown tensor dtype");
  }
  if (!os) throw IoError("failed writing tensor record");
}

Tensor read_tensor(std::istream& is, TensorDtype* dtype_out) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size())) throw IoError("tensor record truncated");
  if (magic != kMagic) throw IoError("bad tensor magic");
  if (get_u8(is) != kVersion) throw IoError("unsupported tensor file version");
  const std::uint8_t dtype = get_u8(is);
  if (dtype > 1) throw IoError("unknown tensor dtype " + std::to_string(dtype));
  const std::uint8_t ndim = get_u8(is);
  if (ndim == 0) throw IoError("tensor record with zero dims");
  Shape dims(ndim);
  for (auto& d : dims) {
    d = get_u32(is);
    if (d == 0) throw IoError("tensor record with an empty dim");
  }
  Tensor t(dims);
  if (dtype == 0) {
    for (auto& v : t.values()) v = static_cast<Scalar>(std::bit_cast<float>(get_u32(is)));
  } else {
    for (auto& v : t.values()) v = static_cast<Scalar>(get_u8(is));
  }
  if (dtype_out) *dtype_out = static_cast<TensorDtype>(dtype);
  return t;
}

void save_tensor_file(const std::filesystem::path& path, const Tensor& tensor, TensorDtype dtype) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, tensor, dtype);
}

Tensor load_tensor_file(const std::filesystem::path& path, TensorDtype* dtype) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  Tensor t = read_tensor(is, dtype);
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes after tensor");
  return t;
}

Tensor to_f32_precision(const Tensor& tensor) {
  Tensor out(tensor.dims());
  for (std::size_t i = 0; i < tensor.numel(); ++i) out[i] = static_cast<Scalar>(static_cast<float>(tensor[i]));
  return out;
}

}  // namespace sparselab
