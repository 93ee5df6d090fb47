#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace muonad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Rank-2 tensors are the common case and
/// get (row, col) accessors; everything else goes through flat indexing.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor identity(std::size_t n);
  /// Rank-2 tensor from nested rows; all rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Elementwise arithmetic; shapes must match exactly (no broadcasting).
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor operator*(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor& axpy(double alpha, const Tensor& x, Tensor& y);

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// a^T * b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);

/// Flattened inner product.
double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& t);
double mean(const Tensor& t);
double l2_norm(const Tensor& t);

double rms(const Tensor& t);
double frobenius_norm(const Tensor& m);
/// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(const Tensor& m);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace muonad
