#include "tsgan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace tsgan::kern {

namespace {
// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelFlops = 1u << 18;
}  // namespace

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// One row of C = A B^T; four independent dot products run in parallel at the
// instruction level while each cell keeps the plain ascending-k order.
static void gemm_nt_row(const double* ai, const double* b, double* ci, std::size_t k,
                        std::size_t n, bool accumulate) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const double* b0 = b + j * k;
    const double* b1 = b + (j + 1) * k;
    const double* b2 = b + (j + 2) * k;
    const double* b3 = b + (j + 3) * k;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      a0 += av * b0[p];
      a1 += av * b1[p];
      a2 += av * b2[p];
      a3 += av * b3[p];
    }
    if (accumulate) {
      ci[j] += a0;
      ci[j + 1] += a1;
      ci[j + 2] += a2;
      ci[j + 3] += a3;
    } else {
      ci[j] = a0;
      ci[j + 1] = a1;
      ci[j + 2] = a2;
      ci[j + 3] = a3;
    }
  }
  for (; j < n; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] = accumulate ? ci[j] + acc : acc;
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_nt_row(a + i * k, b, c + i * n, k, n, accumulate);
}

// a is k x m, c = a^T b with c m x n; the inner j loop has no reduction so it
// vectorizes as is.
static void gemm_tn_row(const double* a, const double* b, double* ci, std::size_t i,
                        std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(ci, ci + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * m + i];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_tn_row(a, b, c + i * n, i, m, k, n, accumulate);
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double squared_distance(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

double min_distance_to_rows(const double* probe, const double* rows, std::size_t r,
                            std::size_t n) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r; ++i)
    best = std::min(best, squared_distance(probe, rows + i * n, n));
  return std::sqrt(best);
}

}  // namespace serial

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (m * k * n < kParallelFlops) {
    serial::gemm_nn(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    double* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (m * k * n < kParallelFlops) {
    serial::gemm_nt(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    serial::gemm_nt_row(a + i * k, b, c + i * n, k, n, accumulate);
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (m * k * n < kParallelFlops) {
    serial::gemm_tn(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    serial::gemm_tn_row(a, b, c + i * n, i, m, k, n, accumulate);
  }
}

double dot(const double* x, const double* y, std::size_t n) { return serial::dot(x, y, n); }

double squared_distance(const double* x, const double* y, std::size_t n) {
  return serial::squared_distance(x, y, n);
}

double min_distance_to_rows(const double* probe, const double* rows, std::size_t r,
                            std::size_t n) {
  // min is exact under reordering, so an OpenMP reduction stays deterministic.
  if (r * n < kParallelFlops) return serial::min_distance_to_rows(probe, rows, r, n);
  double best = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(min : best)
  for (long long i = 0; i < static_cast<long long>(r); ++i)
    best = std::min(best, serial::squared_distance(probe, rows + static_cast<std::size_t>(i) * n, n));
  return std::sqrt(best);
}

}  // namespace tsgan::kern
