#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vmg {

using Shape = std::vector<std::size_t>;

/// Thrown when operand shapes are incompatible. The message names the op.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for non-finite values, failed factorizations and similar.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Rank 0 is a scalar, rank 1 a vector and rank 2 a matrix. Most of the
/// library works on rank-2 values; vectors appear as n x 1 or 1 x n.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor identity(std::size_t n);
  static Tensor column(std::span<const double> values);
  static Tensor row(std::span<const double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Row count of a rank-2 tensor (1 for rank 0, length for rank 1).
  std::size_t rows() const noexcept;
  /// Column count of a rank-2 tensor (1 for ranks 0 and 1).
  std::size_t cols() const noexcept;

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  /// Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  Tensor transposed() const;

  bool all_finite() const noexcept;
  void fill(double value);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Max |a - b| over elements; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);
/// ||a - b||_F / max(||b||_F, tiny).
double relative_frobenius_error(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);

}  // namespace vmg
