#include "snac/kernels.hpp"

#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace snac::kernels {

namespace {

using Index = std::ptrdiff_t;

inline bool go_parallel(std::size_t work) { return work >= kParallelThreshold; }

template <class F>
void for_each_index(std::size_t n, F&& f) {
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (Index i = 0; i < static_cast<Index>(n); ++i) f(static_cast<std::size_t>(i));
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void unary(Unary op, std::span<const double> a, std::span<double> out) {
  const double* src = a.data();
  double* dst = out.data();
  switch (op) {
    case Unary::neg: for_each_index(a.size(), [=](std::size_t i) { dst[i] = -src[i]; }); break;
    case Unary::exp: for_each_index(a.size(), [=](std::size_t i) { dst[i] = std::exp(src[i]); }); break;
    case Unary::log: for_each_index(a.size(), [=](std::size_t i) { dst[i] = std::log(src[i]); }); break;
    case Unary::tanh: for_each_index(a.size(), [=](std::size_t i) { dst[i] = std::tanh(src[i]); }); break;
  }
}

void binary(Binary op, std::span<const double> a, std::span<const double> b,
            std::span<double> out) {
  const double* x = a.data();
  const double* y = b.data();
  double* dst = out.data();
  switch (op) {
    case Binary::add: for_each_index(a.size(), [=](std::size_t i) { dst[i] = x[i] + y[i]; }); break;
    case Binary::sub: for_each_index(a.size(), [=](std::size_t i) { dst[i] = x[i] - y[i]; }); break;
    case Binary::mul: for_each_index(a.size(), [=](std::size_t i) { dst[i] = x[i] * y[i]; }); break;
    case Binary::div: for_each_index(a.size(), [=](std::size_t i) { dst[i] = x[i] / y[i]; }); break;
  }
}

void scale(std::span<const double> a, double alpha, double beta,
           std::span<double> out) {
  const double* src = a.data();
  double* dst = out.data();
  for_each_index(a.size(), [=](std::size_t i) { dst[i] = alpha * src[i] + beta; });
}

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(m * n * k))
  for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  // Row i of C accumulates a[p, i] * b[p, :] over p in order: same sums as the
  // reference, but streaming over contiguous rows of b.
#pragma omp parallel for schedule(static) if (go_parallel(m * n * k))
  for (Index ii = 0; ii < static_cast<Index>(k); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* row = c + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      const double w = a[p * k + i];
      const double* src = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += w * src[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k) {
#pragma omp parallel for schedule(static) if (go_parallel(m * n * k))
  for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
      c[i * k + j] = acc;
    }
  }
}

double sum(std::span<const double> a) {
  const std::size_t blocks = (a.size() + kReduceBlock - 1) / kReduceBlock;
  if (blocks <= 1) return serial::sum(a);
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static) if (go_parallel(a.size()))
  for (Index bb = 0; bb < static_cast<Index>(blocks); ++bb) {
    const auto b = static_cast<std::size_t>(bb);
    const std::size_t begin = b * kReduceBlock;
    const std::size_t len = std::min(kReduceBlock, a.size() - begin);
    partial[b] = serial::sum(a.subspan(begin, len));
  }
  return serial::sum(partial);
}

void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) if (go_parallel(rows * cols))
  for (Index jj = 0; jj < static_cast<Index>(cols); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += a[i * cols + j];
    out[j] = acc;
  }
}

void row_sum(const double* a, double* out, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) if (go_parallel(rows * cols))
  for (Index ii = 0; ii < static_cast<Index>(rows); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += a[i * cols + j];
    out[i] = acc;
  }
}

}  // namespace snac::kernels
