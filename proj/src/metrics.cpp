#include "tsgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tsgan/kernels.hpp"

namespace tsgan::metrics {

double median_pairwise_distance(const SeriesBatch& joint) {
  const std::size_t n = joint.count;
  if (n < 2) throw ValueError("median distance: need at least two points");
  std::vector<double> d2;
  d2.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d2.push_back(kern::squared_distance(joint.row_ptr(i), joint.row_ptr(j), joint.length));

  const std::size_t m = d2.size();
  auto mid = d2.begin() + m / 2;
  std::nth_element(d2.begin(), mid, d2.end());
  double med2 = *mid;
  if (m % 2 == 0) {
    // lower middle is the max of the left partition
    double lower = *std::max_element(d2.begin(), mid);
    med2 = 0.5 * (std::sqrt(lower) + std::sqrt(med2));
    if (med2 == 0.0) throw ValueError("median distance: all points identical");
    return med2;
  }
  const double med = std::sqrt(med2);
  if (med == 0.0) throw ValueError("median distance: all points identical");
  return med;
}

KernelConfig median_heuristic(const SeriesBatch& x, const SeriesBatch& y) {
  const double med = median_pairwise_distance(data::concat_batches(x, y));
  return KernelConfig{{1.0 / (2.0 * med * med)}};
}

namespace {

double kernel_value(const double* a, const double* b, std::size_t len,
                    const KernelConfig& k) {
  const double d2 = kern::squared_distance(a, b, len);
  double acc = 0.0;
  for (double alpha : k.alphas) acc += std::exp(-alpha * d2);
  return acc;
}

}  // namespace

double mmd2_unbiased(const SeriesBatch& x, const SeriesBatch& y, const KernelConfig& k) {
  const std::size_t n = x.count, m = y.count;
  if (n < 2 || m < 2) throw ValueError("mmd2: both samples need at least 2 rows");
  if (x.length != y.length) throw ShapeError("mmd2: record lengths differ");
  if (k.alphas.empty()) throw ValueError("mmd2: no kernel bandwidths");
  for (double a : k.alphas)
    if (!(a > 0.0)) throw ValueError("mmd2: bandwidths must be positive");
  const std::size_t len = x.length;

  // Per-row partial sums filled by one thread each, then reduced in index
  // order so the result does not depend on the thread count.
  std::vector<double> xx(n, 0.0), xy(n, 0.0), yy(m, 0.0);

#pragma omp parallel for schedule(static)
  for (long long il = 0; il < static_cast<long long>(n); ++il) {
    const std::size_t i = static_cast<std::size_t>(il);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sxx += kernel_value(x.row_ptr(i), x.row_ptr(j), len, k);
    for (std::size_t j = 0; j < m; ++j)
      sxy += kernel_value(x.row_ptr(i), y.row_ptr(j), len, k);
    xx[i] = sxx;
    xy[i] = sxy;
  }
#pragma omp parallel for schedule(static)
  for (long long il = 0; il < static_cast<long long>(m); ++il) {
    const std::size_t i = static_cast<std::size_t>(il);
    double syy = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) syy += kernel_value(y.row_ptr(i), y.row_ptr(j), len, k);
    yy[i] = syy;
  }

  double term_xx = 0.0, term_xy = 0.0, term_yy = 0.0;
  for (double v : xx) term_xx += v;
  for (double v : xy) term_xy += v;
  for (double v : yy) term_yy += v;

  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  return term_xx / (dn * (dn - 1.0)) - 2.0 * term_xy / (dn * dm) + term_yy / (dm * (dm - 1.0));
}

namespace {

double point_cost(double a, double b) {
  const double d = a - b;
  return d * d;
}

}  // namespace

double dtw_exact(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size(), m = y.size();
  if (n == 0 || m == 0) throw ValueError("dtw: empty series");
  std::vector<double> prev(m), cur(m);
  prev[0] = point_cost(x[0], y[0]);
  for (std::size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + point_cost(x[0], y[j]);
  for (std::size_t i = 1; i < n; ++i) {
    cur[0] = prev[0] + point_cost(x[i], y[0]);
    for (std::size_t j = 1; j < m; ++j) {
      const double best = std::min(cur[j - 1], std::min(prev[j], prev[j - 1]));
      cur[j] = point_cost(x[i], y[j]) + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

namespace {

using WarpPath = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

struct Window {
  // inclusive column range per row; lo > hi means empty
  std::vector<std::size_t> lo, hi;
};

Window full_window(std::size_t n, std::size_t m) {
  Window w;
  w.lo.assign(n, 0);
  w.hi.assign(n, m - 1);
  return w;
}

/// Windowed DP with path backtracking. Cells outside the window are +inf.
std::pair<double, WarpPath> dtw_window(std::span<const double> x, std::span<const double> y,
                                       const Window& win) {
  const std::size_t n = x.size(), m = y.size();
  const double inf = std::numeric_limits<double>::infinity();
  // dense rows keep the indexing simple; series here are short (desk scale)
  std::vector<double> cost(n * m, inf);
  std::vector<std::uint8_t> from(n * m, 0);  // 0 diag, 1 left, 2 up

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = win.lo[i]; j <= win.hi[i] && j < m; ++j) {
      const double f = point_cost(x[i], y[j]);
      if (i == 0 && j == 0) {
        cost[0] = f;
        continue;
      }
      double best = inf;
      std::uint8_t dir = 0;
      if (i > 0 && j > 0 && cost[(i - 1) * m + (j - 1)] < best) {
        best = cost[(i - 1) * m + (j - 1)];
        dir = 0;
      }
      if (j > 0 && cost[i * m + (j - 1)] < best) {
        best = cost[i * m + (j - 1)];
        dir = 1;
      }
      if (i > 0 && cost[(i - 1) * m + j] < best) {
        best = cost[(i - 1) * m + j];
        dir = 2;
      }
      if (best == inf) continue;  // unreachable cell
      cost[i * m + j] = f + best;
      from[i * m + j] = dir;
    }
  }

  WarpPath path;
  std::size_t i = n - 1, j = m - 1;
  path.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  while (i != 0 || j != 0) {
    switch (from[i * m + j]) {
      case 0:
        if (i > 0) --i;
        if (j > 0) --j;
        break;
      case 1:
        --j;
        break;
      default:
        --i;
        break;
    }
    path.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  }
  std::reverse(path.begin(), path.end());
  return {cost[(n - 1) * m + (m - 1)], std::move(path)};
}

std::vector<double> halve(std::span<const double> x) {
  std::vector<double> out;
  out.reserve(x.size() / 2);
  for (std::size_t i = 0; i + 1 < x.size(); i += 2) out.push_back(0.5 * (x[i] + x[i + 1]));
  return out;
}

/// Projects a low-resolution warp path to double resolution and dilates it by
/// `radius` cells, producing contiguous per-row column ranges.
Window expand_window(const WarpPath& path, std::size_t n, std::size_t m, int radius) {
  Window w;
  w.lo.assign(n, m);  // empty
  w.hi.assign(n, 0);
  auto mark = [&](long long i, long long j) {
    if (i < 0 || j < 0) return;
    const std::size_t i0 = static_cast<std::size_t>(2 * i);
    const std::size_t j0 = static_cast<std::size_t>(2 * j);
    for (std::size_t ii = i0; ii <= i0 + 1 && ii < n; ++ii) {
      const std::size_t jlo = std::min(j0, m - 1);
      const std::size_t jhi = std::min(j0 + 1, m - 1);
      if (w.lo[ii] > jlo) w.lo[ii] = jlo;
      if (w.hi[ii] < jhi) w.hi[ii] = jhi;
    }
  };
  for (const auto& [pi, pj] : path)
    for (int a = -radius; a <= radius; ++a)
      for (int b = -radius; b <= radius; ++b)
        mark(static_cast<long long>(pi) + a, static_cast<long long>(pj) + b);

  // rows beyond 2 * low-res height inherit the last marked range
  std::size_t last_lo = 0, last_hi = m - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (w.lo[i] > w.hi[i]) {
      w.lo[i] = last_lo;
      w.hi[i] = last_hi;
    } else {
      last_lo = w.lo[i];
      last_hi = w.hi[i];
    }
    // keep ranges monotone so the DP region stays connected
    if (i > 0 && w.lo[i] < w.lo[i - 1]) w.lo[i] = w.lo[i - 1];
    if (w.hi[i] < w.lo[i]) w.hi[i] = std::min(m - 1, w.lo[i]);
  }
  w.hi[n - 1] = m - 1;
  if (w.lo[n - 1] > w.hi[n - 1]) w.lo[n - 1] = w.hi[n - 1];
  return w;
}

std::pair<double, WarpPath> fastdtw_rec(std::span<const double> x, std::span<const double> y,
                                        int radius) {
  const std::size_t min_size = static_cast<std::size_t>(radius) + 2;
  if (x.size() <= min_size || y.size() <= min_size)
    return dtw_window(x, y, full_window(x.size(), y.size()));
  std::vector<double> hx = halve(x);
  std::vector<double> hy = halve(y);
  auto [low_cost, low_path] = fastdtw_rec(hx, hy, radius);
  (void)low_cost;
  Window win = expand_window(low_path, x.size(), y.size(), radius);
  auto refined = dtw_window(x, y, win);
  if (!std::isfinite(refined.first))  // degenerate window, fall back to exact
    return dtw_window(x, y, full_window(x.size(), y.size()));
  return refined;
}

}  // namespace

double fastdtw(std::span<const double> x, std::span<const double> y, int radius) {
  if (x.empty() || y.empty()) throw ValueError("fastdtw: empty series");
  if (radius < 0) throw ValueError("fastdtw: radius must be >= 0");
  // The plain recursion is not monotone in the radius (a wider window can
  // re-route the coarse path and miss cells the narrower one kept). Reporting
  // the best cost over refinement radii <= radius restores monotonicity while
  // each term stays a restricted-path DTW, so the result never undercuts the
  // exact program.
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= radius; ++k) best = std::min(best, fastdtw_rec(x, y, k).first);
  return best;
}

MetricsRecord evaluate_epoch(const SeriesBatch& test, const SeriesBatch& synth, double mmd_frac,
                             double dtw_frac, Rng& rng) {
  if (!(mmd_frac > 0.0 && mmd_frac <= 1.0) || !(dtw_frac > 0.0 && dtw_frac <= 1.0))
    throw ValueError("evaluate_epoch: fractions must be in (0, 1]");
  if (test.length != synth.length) throw ShapeError("evaluate_epoch: record lengths differ");

  auto take = [&](const SeriesBatch& b, std::size_t k) {
    if (k == b.count) return b;  // whole set, identity order
    std::vector<std::size_t> idx = rng.sample_indices(b.count, k);
    return b.select(idx);
  };

  const std::size_t k_mmd_test = static_cast<std::size_t>(mmd_frac * static_cast<double>(test.count));
  const std::size_t k_mmd_synth =
      static_cast<std::size_t>(mmd_frac * static_cast<double>(synth.count));
  if (k_mmd_test < 2 || k_mmd_synth < 2)
    throw ValueError("evaluate_epoch: MMD subsample smaller than 2");

  MetricsRecord rec;
  rec.mmd_frac = mmd_frac;
  rec.dtw_frac = dtw_frac;

  SeriesBatch xs = take(test, k_mmd_test);
  SeriesBatch ys = take(synth, k_mmd_synth);
  rec.mmd2 = mmd2_unbiased(xs, ys, median_heuristic(xs, ys));

  const std::size_t k_dtw = std::max<std::size_t>(
      1, static_cast<std::size_t>(dtw_frac * static_cast<double>(std::min(test.count, synth.count))));
  // independent draws for each side
  SeriesBatch dsub_test = k_dtw == test.count ? test : test.select(rng.sample_indices(test.count, k_dtw));
  SeriesBatch dsub_synth =
      k_dtw == synth.count ? synth : synth.select(rng.sample_indices(synth.count, k_dtw));

  std::vector<double> costs(k_dtw, 0.0);
#pragma omp parallel for schedule(static)
  for (long long il = 0; il < static_cast<long long>(k_dtw); ++il) {
    const std::size_t i = static_cast<std::size_t>(il);
    costs[i] = fastdtw(dsub_test.row(i), dsub_synth.row(i), 1);
  }
  double acc = 0.0;
  for (double c : costs) acc += c;  // pair-index order
  rec.dtw_mean = acc / static_cast<double>(k_dtw);
  return rec;
}

}  // namespace tsgan::metrics
