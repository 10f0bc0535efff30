#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "snac/error.hpp"

namespace snac {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

// Dense row-major float64 array. The last axis is the channel axis; all
// leading axes are flattened into rows for the channel ops below. A rank-0
// tensor holds one scalar.
class Tensor {
 public:
  Tensor() : shape_{0} {}
  // Validates extent product and rejects NaN/Inf.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  // Skips the finiteness scan; for op results whose caller checks later.
  static Tensor adopt(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : numel() / cols(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * cols() + col]; }
  double& at(std::size_t row, std::size_t col) { return data_[row * cols() + col]; }
  double item() const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  struct Unchecked {};
  Tensor(Shape shape, std::vector<double> data, Unchecked);

  Shape shape_;
  std::vector<double> data_;
};

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor scale(const Tensor& a, double alpha);
Tensor add_scalar(const Tensor& a, double beta);

// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Adds a length-cols bias to every row.
Tensor add_row(const Tensor& a, const Tensor& bias);

Tensor slice_channels(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor reverse_channels(const Tensor& a);
// Each row repeated `times` times consecutively: [r0, r0, r1, r1, ...].
Tensor repeat_rows(const Tensor& a, std::size_t times);

Tensor sum(const Tensor& a);           // rank-0
Tensor mean(const Tensor& a);          // rank-0
Tensor sum_channels(const Tensor& a);  // [rows x 1]

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace snac
