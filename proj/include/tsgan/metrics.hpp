#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsgan/data.hpp"
#include "tsgan/rng.hpp"

namespace tsgan::metrics {

using data::SeriesBatch;

/// Gaussian RBF kernel mixture K(x, x') = sum_j exp(-alpha_j ||x - x'||^2).
struct KernelConfig {
  std::vector<double> alphas;
};

/// Median of all pairwise Euclidean distances (i < j) over the pooled rows.
/// Even counts average the two middle order statistics. All-identical points
/// are a ValueError (zero median).
double median_pairwise_distance(const SeriesBatch& joint);

/// Single bandwidth alpha = 1 / (2 median^2) of the joint pairwise distances.
KernelConfig median_heuristic(const SeriesBatch& x, const SeriesBatch& y);

/// Unbiased three-term estimator; may be slightly negative by construction.
/// Requires n, m >= 2.
double mmd2_unbiased(const SeriesBatch& x, const SeriesBatch& y, const KernelConfig& k);

/// Full O(NM) dynamic program over squared pointwise differences.
double dtw_exact(std::span<const double> x, std::span<const double> y);

/// Multi-resolution approximation: halve, solve recursively, project the warp
/// path, refine within `radius`. Never undercuts dtw_exact; equals it when a
/// series is short enough to hit the base case (length <= radius + 2).
double fastdtw(std::span<const double> x, std::span<const double> y, int radius = 1);

struct MetricsRecord {
  double mmd2 = 0.0;
  double dtw_mean = 0.0;
  double mmd_frac = 1.0;
  double dtw_frac = 1.0;
  std::uint64_t seed = 0;
};

/// Subsamples both sets at the given fractions (identity order when a
/// fraction keeps the whole set), computes mmd2_unbiased on the MMD subsample
/// with the median heuristic, and the mean fastdtw over position-paired
/// subsamples after independent shuffles.
MetricsRecord evaluate_epoch(const SeriesBatch& test, const SeriesBatch& synth, double mmd_frac,
                             double dtw_frac, Rng& rng);

}  // namespace tsgan::metrics
