// Compares the OpenMP kernels against the serial reference implementations
// and reports speedups, checking bitwise agreement along the way.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tsgan/kernels.hpp"
#include "tsgan/metrics.hpp"
#include "tsgan/rng.hpp"

using namespace tsgan;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

template <class F>
double time_ms(F&& f, int reps) {
  f();  // warm up
  const double t0 = now_ms();
  for (int i = 0; i < reps; ++i) f();
  return (now_ms() - t0) / reps;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void bench_gemm(std::size_t m, std::size_t k, std::size_t n, Rng& rng) {
  std::vector<double> a = random_vec(m * k, rng);
  std::vector<double> b = random_vec(k * n, rng);
  std::vector<double> c_par(m * n), c_ser(m * n);

  const int reps = 20;
  const double t_ser =
      time_ms([&] { kern::serial::gemm_nn(a.data(), b.data(), c_ser.data(), m, k, n, false); }, reps);
  const double t_par =
      time_ms([&] { kern::gemm_nn(a.data(), b.data(), c_par.data(), m, k, n, false); }, reps);
  const bool same = c_par == c_ser;
  const double gflops = 2.0 * m * k * n / (t_par * 1e6);
  std::printf("gemm_nn %4zux%4zux%4zu  serial %8.3f ms  omp %8.3f ms  x%.2f  %.2f GF/s  %s\n", m,
              k, n, t_ser, t_par, t_ser / t_par, gflops, same ? "bitwise-equal" : "MISMATCH");
}

void bench_dtw_pairs(std::size_t pairs, std::size_t len, Rng& rng) {
  std::vector<std::vector<double>> xs, ys;
  for (std::size_t i = 0; i < pairs; ++i) {
    xs.push_back(random_vec(len, rng));
    ys.push_back(random_vec(len, rng));
  }
  std::vector<double> out_par(pairs), out_ser(pairs);

  const double t_ser = time_ms(
      [&] {
        for (std::size_t i = 0; i < pairs; ++i) out_ser[i] = metrics::fastdtw(xs[i], ys[i], 1);
      },
      3);
  const double t_par = time_ms(
      [&] {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(pairs); ++i)
          out_par[i] = metrics::fastdtw(xs[i], ys[i], 1);
      },
      3);
  const bool same = out_par == out_ser;
  std::printf("fastdtw %4zu pairs len %3zu  serial %8.3f ms  omp %8.3f ms  x%.2f  %s\n", pairs,
              len, t_ser, t_par, t_ser / t_par, same ? "bitwise-equal" : "MISMATCH");
}

void bench_min_distance(std::size_t probes, std::size_t rows, std::size_t len, Rng& rng) {
  std::vector<double> table = random_vec(rows * len, rng);
  std::vector<std::vector<double>> ps;
  for (std::size_t i = 0; i < probes; ++i) ps.push_back(random_vec(len, rng));
  std::vector<double> out_par(probes), out_ser(probes);

  const double t_ser = time_ms(
      [&] {
        for (std::size_t i = 0; i < probes; ++i)
          out_ser[i] = kern::serial::min_distance_to_rows(ps[i].data(), table.data(), rows, len);
      },
      3);
  const double t_par = time_ms(
      [&] {
        for (std::size_t i = 0; i < probes; ++i)
          out_par[i] = kern::min_distance_to_rows(ps[i].data(), table.data(), rows, len);
      },
      3);
  const bool same = out_par == out_ser;
  std::printf("min-dist %3zu probes vs %5zu rows  serial %8.3f ms  omp %8.3f ms  x%.2f  %s\n",
              probes, rows, t_ser, t_par, t_ser / t_par, same ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; parallel entry points fall back to serial\n");
#endif
  Rng rng(42);
  bench_gemm(50, 50, 50, rng);
  bench_gemm(128, 128, 128, rng);
  bench_gemm(256, 256, 256, rng);
  bench_gemm(512, 512, 512, rng);
  bench_dtw_pairs(64, 187, rng);
  bench_min_distance(100, 10000, 40, rng);
  return 0;
}
