#include "snac/kernels.hpp"

#include <cmath>

namespace snac::kernels::serial {

namespace {

inline double apply(Unary op, double x) {
  switch (op) {
    case Unary::neg: return -x;
    case Unary::exp: return std::exp(x);
    case Unary::log: return std::log(x);
    case Unary::tanh: return std::tanh(x);
  }
  return x;
}

inline double apply(Binary op, double x, double y) {
  switch (op) {
    case Binary::add: return x + y;
    case Binary::sub: return x - y;
    case Binary::mul: return x * y;
    case Binary::div: return x / y;
  }
  return x;
}

}  // namespace

void unary(Unary op, std::span<const double> a, std::span<double> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i]);
}

void binary(Binary op, std::span<const double> a, std::span<const double> b,
            std::span<double> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b[i]);
}

void scale(std::span<const double> a, double alpha, double beta,
           std::span<double> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + beta;
}

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < m; ++p) acc += a[p * k + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
      c[i * k + j] = acc;
    }
  }
}

double sum(std::span<const double> a) {
  double acc = 0.0;
  for (double x : a) acc += x;
  return acc;
}

void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += a[i * cols + j];
    out[j] = acc;
  }
}

void row_sum(const double* a, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += a[i * cols + j];
    out[i] = acc;
  }
}

}  // namespace snac::kernels::serial
