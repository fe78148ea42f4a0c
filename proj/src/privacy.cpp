#include "tsgan/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tsgan/kernels.hpp"

namespace tsgan::privacy {

double mean_distance_baseline(const SeriesBatch& train, const SeriesBatch& test,
                              const SeriesBatch& synth, Rng& rng, std::size_t max_pairs) {
  if (train.count == 0 || test.count == 0 || synth.count == 0)
    throw ValueError("mean_distance_baseline: empty input set");
  if (max_pairs == 0) throw ValueError("mean_distance_baseline: max_pairs must be positive");
  SeriesBatch pool = data::concat_batches(data::concat_batches(train, test), synth);
  const std::size_t n = pool.count;
  if (n < 2) throw ValueError("mean_distance_baseline: need at least two records");

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t total = n * (n - 1) / 2;
  if (total <= max_pairs) {
    pairs.reserve(total);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  } else {
    pairs.reserve(max_pairs);
    while (pairs.size() < max_pairs) {
      std::size_t i = rng.index(n);
      std::size_t j = rng.index(n);
      if (i != j) pairs.emplace_back(i, j);
    }
  }

  std::vector<double> dist(pairs.size());
#pragma omp parallel for schedule(static)
  for (long long il = 0; il < static_cast<long long>(pairs.size()); ++il) {
    const auto& [i, j] = pairs[static_cast<std::size_t>(il)];
    dist[static_cast<std::size_t>(il)] =
        std::sqrt(kern::squared_distance(pool.row_ptr(i), pool.row_ptr(j), pool.length));
  }
  double acc = 0.0;
  for (double d : dist) acc += d;
  return acc / static_cast<double>(dist.size());
}

AttackReport presence_disclosure(const SeriesBatch& train, const SeriesBatch& test,
                                 const SeriesBatch& synth, const AttackConfig& cfg) {
  if (train.count == 0 || test.count == 0 || synth.count == 0)
    throw ValueError("presence_disclosure: empty input set");
  if (cfg.r_values.empty() || cfg.eps_fractions.empty())
    throw ValueError("presence_disclosure: empty grid");
  if (!std::is_sorted(cfg.eps_fractions.begin(), cfg.eps_fractions.end()))
    throw ValueError("presence_disclosure: eps fractions must be ascending");
  for (double f : cfg.eps_fractions)
    if (!(f > 0.0 && f < 1.0))
      throw ValueError("presence_disclosure: eps fractions must lie in (0, 1)");
  for (std::size_t r : cfg.r_values)
    if (r == 0 || r > train.count || r > test.count)
      throw ValueError("presence_disclosure: sample size r=" + std::to_string(r) +
                       " infeasible for train=" + std::to_string(train.count) +
                       " test=" + std::to_string(test.count));
  if (train.length != test.length || train.length != synth.length)
    throw ShapeError("presence_disclosure: record lengths differ");

  Rng rng(cfg.seed);
  AttackReport report;
  report.seed = cfg.seed;
  report.max_pairs = cfg.max_pairs;
  report.mean_distance = mean_distance_baseline(train, test, synth, rng, cfg.max_pairs);

  for (std::size_t r : cfg.r_values) {
    const std::vector<std::size_t> train_idx = rng.sample_indices(train.count, r);
    const std::vector<std::size_t> test_idx = rng.sample_indices(test.count, r);

    // one distance scan per sampled record, reused across every eps
    std::vector<double> train_min(r), test_min(r);
#pragma omp parallel for schedule(static)
    for (long long il = 0; il < static_cast<long long>(r); ++il) {
      const std::size_t i = static_cast<std::size_t>(il);
      train_min[i] = kern::min_distance_to_rows(train.row_ptr(train_idx[i]), synth.values.data(),
                                                synth.count, synth.length);
      test_min[i] = kern::min_distance_to_rows(test.row_ptr(test_idx[i]), synth.values.data(),
                                               synth.count, synth.length);
    }

    for (double frac : cfg.eps_fractions) {
      const double eps = frac * report.mean_distance;
      AttackCell cell;
      cell.r = r;
      cell.eps_fraction = frac;
      for (double d : train_min)
        if (d < eps) ++cell.tp;
      for (double d : test_min)
        if (d < eps) ++cell.fp;
      cell.fn = r - cell.tp;
      cell.tn = r - cell.fp;
      cell.recall = static_cast<double>(cell.tp) / static_cast<double>(r);
      if (cell.tp + cell.fp > 0)
        cell.precision =
            static_cast<double>(cell.tp) / static_cast<double>(cell.tp + cell.fp);
      report.cells.push_back(cell);
    }
  }
  return report;
}

std::string report_to_csv(const AttackReport& report) {
  std::ostringstream out;
  out << "r,eps_fraction,tp,fp,tn,fn,precision,recall\n";
  for (const AttackCell& c : report.cells) {
    out << c.r << "," << format_double(c.eps_fraction) << "," << c.tp << "," << c.fp << ","
        << c.tn << "," << c.fn << ",";
    if (c.precision) out << format_double(*c.precision);
    out << "," << format_double(c.recall) << "\n";
  }
  return out.str();
}

nlohmann::json report_to_json(const AttackReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const AttackCell& c : report.cells) {
    nlohmann::json jc{{"r", c.r},   {"eps_fraction", c.eps_fraction},
                      {"tp", c.tp}, {"fp", c.fp},
                      {"tn", c.tn}, {"fn", c.fn},
                      {"recall", c.recall}};
    if (c.precision)
      jc["precision"] = *c.precision;
    else
      jc["precision"] = nullptr;
    cells.push_back(std::move(jc));
  }
  return nlohmann::json{{"mean_distance", report.mean_distance},
                        {"max_pairs", report.max_pairs},
                        {"seed", report.seed},
                        {"cells", cells}};
}

namespace {

std::vector<double> default_eps_fractions() {
  std::vector<double> f;
  for (int i = 1; i <= 10; ++i) f.push_back(static_cast<double>(i) / 20.0);
  return f;
}

}  // namespace

AttackConfig sine_default_config() {
  AttackConfig cfg;
  cfg.r_values = {250, 500, 1000, 1500, 2000, 2500, 3000};
  cfg.eps_fractions = default_eps_fractions();
  return cfg;
}

AttackConfig ecg_default_config() {
  AttackConfig cfg;
  cfg.r_values = {1000, 2500, 5000, 7500, 10000};
  cfg.eps_fractions = default_eps_fractions();
  return cfg;
}

}  // namespace tsgan::privacy
