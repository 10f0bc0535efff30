#include "snac/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "snac/kernels.hpp"

namespace snac {

namespace {

std::size_t extent_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " +
                     to_string(a.shape()));
}

Tensor binary(kernels::Binary kind, const char* op, const Tensor& a, const Tensor& b) {
  require_same(op, a, b);
  std::vector<double> out(a.numel());
  kernels::binary(kind, a.data(), b.data(), out);
  return Tensor::adopt(a.shape(), std::move(out));
}

Tensor unary(kernels::Unary kind, const Tensor& a) {
  std::vector<double> out(a.numel());
  kernels::unary(kind, a.data(), out);
  return Tensor::adopt(a.shape(), std::move(out));
}

Shape with_cols(const Tensor& a, std::size_t cols) {
  Shape s = a.shape().empty() ? Shape{1} : a.shape();
  s.back() = cols;
  return s;
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (extent_product(shape_) != data_.size())
    throw ShapeError("Tensor: shape " + to_string(shape_) + " needs " +
                     std::to_string(extent_product(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  if (!all_finite()) throw NonFiniteError("Tensor", "input contains NaN or Inf");
}

Tensor::Tensor(Shape shape, std::vector<double> data, Unchecked)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor Tensor::adopt(Shape shape, std::vector<double> data) {
  return Tensor(std::move(shape), std::move(data), Unchecked{});
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = extent_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return vector(std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (extent_product(shape) != data_.size())
    throw ShapeError("reshape: cannot view " + to_string(shape_) + " as " +
                     to_string(shape));
  return Tensor(std::move(shape), data_, Unchecked{});
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(kernels::Binary::add, "add", a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(kernels::Binary::sub, "sub", a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(kernels::Binary::mul, "mul", a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(kernels::Binary::div, "div", a, b); }

Tensor neg(const Tensor& a) { return unary(kernels::Unary::neg, a); }
Tensor exp(const Tensor& a) { return unary(kernels::Unary::exp, a); }
Tensor log(const Tensor& a) { return unary(kernels::Unary::log, a); }
Tensor tanh(const Tensor& a) { return unary(kernels::Unary::tanh, a); }

Tensor scale(const Tensor& a, double alpha) {
  std::vector<double> out(a.numel());
  kernels::scale(a.data(), alpha, 0.0, out);
  return Tensor::adopt(a.shape(), std::move(out));
}

Tensor add_scalar(const Tensor& a, double beta) {
  std::vector<double> out(a.numel());
  kernels::scale(a.data(), 1.0, beta, out);
  return Tensor::adopt(a.shape(), std::move(out));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul: inner dimension mismatch " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::adopt({m, n}, std::move(out));
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  if (bias.numel() != a.cols())
    throw ShapeError("add_row: bias " + to_string(bias.shape()) +
                     " does not match channels of " + to_string(a.shape()));
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.numel());
  const double* src = a.data().data();
  const double* bb = bias.data().data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = src[i * cols + j] + bb[j];
  return Tensor::adopt(a.shape(), std::move(out));
}

Tensor slice_channels(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols())
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") out of bounds for " + to_string(a.shape()));
  const std::size_t rows = a.rows(), cols = a.cols(), width = end - begin;
  std::vector<double> out(rows * width);
  for (std::size_t i = 0; i < rows; ++i)
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * cols + begin), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  return Tensor::adopt(with_cols(a, width), std::move(out));
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.rank() != b.rank())
    throw ShapeError("concat_channels: row mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols(), cols = ca + cb;
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * ca), ca,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols));
    std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(i * cb), cb,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols + ca));
  }
  return Tensor::adopt(with_cols(a, cols), std::move(out));
}

Tensor reverse_channels(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = a[i * cols + (cols - 1 - j)];
  return Tensor::adopt(a.shape(), std::move(out));
}

Tensor repeat_rows(const Tensor& a, std::size_t times) {
  require_rank2("repeat_rows", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows * times * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t t = 0; t < times; ++t)
      std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * cols), cols,
                  out.begin() + static_cast<std::ptrdiff_t>((i * times + t) * cols));
  return Tensor::adopt({rows * times, cols}, std::move(out));
}

Tensor sum(const Tensor& a) { return Tensor::adopt({}, {kernels::sum(a.data())}); }

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return Tensor::adopt({}, {kernels::sum(a.data()) / static_cast<double>(a.numel())});
}

Tensor sum_channels(const Tensor& a) {
  std::vector<double> out(a.rows());
  kernels::row_sum(a.data().data(), out.data(), a.rows(), a.cols());
  return Tensor::adopt({a.rows(), 1}, std::move(out));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace snac
