#pragma once

#include <cstddef>

namespace tsgan::kern {

// Dense inner kernels. The default entry points parallelize with OpenMP when
// the problem is large enough; kern::serial holds the plain reference
// implementations that the tests and the benchmark compare against.
//
// Every output element is produced by exactly one thread and the per-element
// summation order matches the serial reference, so results are bit-identical
// for any thread count. Builds must not enable -ffast-math.

// c = a(m x k) * b(k x n), or c += ... when accumulate is set
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// c = a(m x k) * b(n x k)^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// c = a(k x m)^T * b(k x n)
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

double dot(const double* x, const double* y, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);

/// Minimum Euclidean distance from `probe` to any row of `rows` (r rows of
/// length n). Scans in row order.
double min_distance_to_rows(const double* probe, const double* rows, std::size_t r,
                            std::size_t n);

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
double dot(const double* x, const double* y, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);
double min_distance_to_rows(const double* probe, const double* rows, std::size_t r,
                            std::size_t n);

}  // namespace serial

}  // namespace tsgan::kern
