#pragma once

#include <cstddef>
#include <span>

// Dense float64 kernels over row-major buffers.
//
// Two implementations share one signature set:
//   snac::kernels          OpenMP row-parallel versions used by Tensor ops
//   snac::kernels::serial  straightforward loops kept as the reference
//
// Every parallel kernel assigns each output element to exactly one thread and
// accumulates in a fixed order, so results do not depend on the thread count.
// Full reductions use fixed-size blocks for the same reason.

namespace snac::kernels {

enum class Unary { neg, exp, log, tanh };
enum class Binary { add, sub, mul, div };

// Below this many output elements the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelThreshold = 1 << 14;
// Block size for blocked reductions (sum).
inline constexpr std::size_t kReduceBlock = 1 << 12;

void unary(Unary op, std::span<const double> a, std::span<double> out);
void binary(Binary op, std::span<const double> a, std::span<const double> b,
            std::span<double> out);
void scale(std::span<const double> a, double alpha, double beta,
           std::span<double> out);  // out = alpha * a + beta

// C[m x n] = A[m x k] * B[k x n]
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n);
// C[k x n] = A[m x k]^T * B[m x n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
// C[m x k] = A[m x n] * B[k x n]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k);

double sum(std::span<const double> a);
// out[j] = sum_i a[i, j] for a of shape rows x cols
void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols);
// out[i] = sum_j a[i, j]
void row_sum(const double* a, double* out, std::size_t rows, std::size_t cols);

namespace serial {

void unary(Unary op, std::span<const double> a, std::span<double> out);
void binary(Binary op, std::span<const double> a, std::span<const double> b,
            std::span<double> out);
void scale(std::span<const double> a, double alpha, double beta,
           std::span<double> out);
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k);
double sum(std::span<const double> a);
void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols);
void row_sum(const double* a, double* out, std::size_t rows, std::size_t cols);

}  // namespace serial

// Number of threads the parallel kernels may use (omp_get_max_threads, or 1).
int max_threads();

}  // namespace snac::kernels
