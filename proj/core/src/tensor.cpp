#include "sparselab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "sparselab/error.hpp"

namespace sparselab {

std::size_t shape_numel(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_dims(const Shape& dims) {
  if (dims.empty()) throw DimensionError("tensor needs at least one dimension");
  for (auto d : dims) {
    if (d == 0) throw DimensionError("tensor dims must be positive: " + shape_string(dims));
  }
}

}  // namespace

Tensor::Tensor(Shape dims, Scalar fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(shape_numel(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<Scalar> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
  check_dims(dims_);
  if (shape_numel(dims_) != data_.size()) {
    throw DimensionError("tensor of dims " + shape_string(dims_) + " given " +
                         std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_string(dims_));
  }
  return dims_[axis];
}

Tensor Tensor::reshaped(Shape dims) const {
  return Tensor(std::move(dims), data_);
}

void Tensor::reshape(Shape dims) {
  check_dims(dims);
  if (shape_numel(dims) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
  }
  dims_ = std::move(dims);
  grad_.reset();
}

std::span<Scalar> Tensor::grad() {
  if (!grad_) grad_.emplace(data_.size(), Scalar{0});
  return *grad_;
}

std::span<const Scalar> Tensor::grad() const {
  if (!grad_) return {};
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) {
    std::fill(grad_->begin(), grad_->end(), Scalar{0});
  } else {
    grad_.emplace(data_.size(), Scalar{0});
  }
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
}

void Tensor::fill(Scalar value) { std::fill(data_.begin(), data_.end(), value); }

bool same_values(const Tensor& a, const Tensor& b) {
  return a.dims() == b.dims() &&
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(Scalar)) == 0;
}

}  // namespace sparselab
