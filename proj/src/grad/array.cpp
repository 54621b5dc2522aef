#include "osc/grad/array.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "osc/errors.hpp"

namespace osc::grad {
namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("Array: shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("Array: dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(product(shape_), fill);
}

Array::Array(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (product(shape_) != values_.size()) {
    throw DimensionError("Array: shape " + shape_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
  }
  if (!all_finite()) throw NumericError("Array: non-finite value");
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Array({rows, cols}, std::move(values));
}

Array Array::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array({1, n}, std::move(values));
}

Array Array::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array({n, 1}, std::move(values));
}

Array Array::scalar(double value) { return Array({1, 1}, std::vector<double>{value}); }

std::size_t Array::rows() const {
  if (shape_.empty()) return 0;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

std::size_t Array::cols() const { return shape_.empty() ? 0 : shape_.back(); }

double Array::item() const {
  if (values_.size() != 1) throw DimensionError("Array::item on shape " + shape_string(shape_));
  return values_[0];
}

bool Array::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Array::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

}  // namespace osc::grad
