#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace osc::grad {

using Shape = std::vector<std::size_t>;

/// Dense row-major fp64 buffer with a shape.
///
/// All arithmetic in grad-core treats an array as a matrix: `cols()` is the
/// last dimension and `rows()` is the product of the leading ones, so a rank-1
/// array of length n behaves like a 1 x n row.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> values);

  static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Array row(std::vector<double> values);
  static Array column(std::vector<double> values);
  static Array scalar(double value);
  static Array zeros_like(const Array& other) { return Array(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool empty() const { return values_.empty(); }
  bool same_shape(const Array& other) const { return rows() == other.rows() && cols() == other.cols(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& buffer() { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  /// Scalar value of a one-element array.
  double item() const;
  bool all_finite() const;
  void fill(double value);

  friend bool operator==(const Array&, const Array&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Shape& shape);

}  // namespace osc::grad
