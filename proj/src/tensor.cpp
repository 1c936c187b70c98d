#include "fitcarl/tensor.hpp"

#include <cmath>
#include <sstream>

namespace fitcarl {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

ShapeError::ShapeError(const std::string& op, const Shape& a, const Shape& b)
    : std::runtime_error(op + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b)) {}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("Tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::scalar(Real value) { return Tensor(Shape{}, std::vector<Real>{value}); }

Tensor Tensor::vector(std::initializer_list<Real> values) {
  return Tensor(Shape{values.size()}, std::vector<Real>(values));
}

Tensor Tensor::vector(std::vector<Real> values) {
  auto n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values) {
  return Tensor(Shape{rows, cols}, std::vector<Real>(values));
}

Real Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

std::span<const Real> Tensor::row(std::size_t i) const {
  return std::span<const Real>(data_).subspan(i * shape_.at(1), shape_.at(1));
}

std::span<Real> Tensor::row(std::size_t i) {
  return std::span<Real>(data_).subspan(i * shape_.at(1), shape_.at(1));
}

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) throw ShapeError("reshape", shape_, shape);
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (auto v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace fitcarl
