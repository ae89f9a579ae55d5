#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sparselab {

#ifdef SPARSELAB_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& dims);
std::string shape_string(const Shape& dims);

// Dense row-major array with an optional gradient slot of identical shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, Scalar fill = Scalar{0});
  Tensor(Shape dims, std::vector<Scalar> values);

  static Tensor scalar(Scalar value) { return Tensor({1}, value); }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }
  std::span<Scalar> values() noexcept { return data_; }
  std::span<const Scalar> values() const noexcept { return data_; }
  const std::vector<Scalar>& storage() const noexcept { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  // Same data viewed under new dims with equal element count.
  Tensor reshaped(Shape dims) const;
  void reshape(Shape dims);

  bool has_grad() const noexcept { return grad_.has_value(); }
  // Allocates a zero gradient if none is present.
  std::span<Scalar> grad();
  std::span<const Scalar> grad() const;
  void zero_grad();
  void drop_grad() noexcept { grad_.reset(); }

  bool all_finite() const noexcept;
  void fill(Scalar value);

 private:
  Shape dims_;
  std::vector<Scalar> data_;
  std::optional<std::vector<Scalar>> grad_;
};

// Bitwise comparison of dims and data; gradients are ignored.
bool same_values(const Tensor& a, const Tensor& b);

}  // namespace sparselab
