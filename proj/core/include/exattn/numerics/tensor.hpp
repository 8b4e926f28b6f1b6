#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace exattn::num {

/// Dense row-major tensor of doubles. Rank 0 (scalar), 1 (vector) and 2
/// (matrix) are the only ranks the ops in this library produce.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() : values_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  // Rank-1 tensors are treated as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  std::span<const double> row(std::size_t r) const { return values().subspan(r * cols(), cols()); }
  std::span<double> row(std::size_t r) { return values().subspan(r * cols(), cols()); }

  double item() const;
  bool all_finite() const noexcept;
  void fill(double v) noexcept;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  // Bitwise equality of shape and values.
  friend bool operator==(const Tensor& a, const Tensor& b) noexcept;

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Tensor::Shape& shape);

}  // namespace exattn::num
