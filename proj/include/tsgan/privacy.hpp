#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsgan/data.hpp"
#include "tsgan/rng.hpp"

namespace tsgan::privacy {

using data::SeriesBatch;

struct AttackConfig {
  std::vector<std::size_t> r_values;     // sample sizes, each drawn from train and from test
  std::vector<double> eps_fractions;     // of the mean-distance baseline, ascending
  std::uint64_t seed = 0;
  std::size_t max_pairs = 100000;        // cap for the mean-distance estimate
};

struct AttackCell {
  std::size_t r = 0;
  double eps_fraction = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision;  // absent when there are no claims
  double recall = 0.0;
};

struct AttackReport {
  double mean_distance = 0.0;
  std::size_t max_pairs = 0;
  std::uint64_t seed = 0;
  std::vector<AttackCell> cells;
};

/// Mean Euclidean distance over the pooled records (train + test + synth):
/// exact when the pair count fits under max_pairs, otherwise a seeded uniform
/// sample of max_pairs pairs.
double mean_distance_baseline(const SeriesBatch& train, const SeriesBatch& test,
                              const SeriesBatch& synth, Rng& rng, std::size_t max_pairs);

/// Presence-disclosure grid: for each (r, eps) draw r records from train and r
/// from test without replacement; a record is claimed in-training iff its
/// minimum Euclidean distance to any synthetic record is strictly below
/// eps_fraction * mean_distance. recall = TP/r; precision = TP/(TP+FP).
AttackReport presence_disclosure(const SeriesBatch& train, const SeriesBatch& test,
                                 const SeriesBatch& synth, const AttackConfig& cfg);

/// CSV `r,eps_fraction,tp,fp,tn,fn,precision,recall`; precision cell empty
/// when undefined.
std::string report_to_csv(const AttackReport& report);
nlohmann::json report_to_json(const AttackReport& report);

/// Default grids: sine r in {250..3000}, ecg r in {1000..10000}; eps
/// fractions 0.05..0.5 in steps of 0.05 for both.
AttackConfig sine_default_config();
AttackConfig ecg_default_config();

}  // namespace tsgan::privacy
