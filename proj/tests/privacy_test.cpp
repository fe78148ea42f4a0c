#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "testutil.hpp"
#include "tsgan/data.hpp"
#include "tsgan/privacy.hpp"

using namespace tsgan;
using namespace tsgan::privacy;
using data::SeriesBatch;

namespace {

SeriesBatch random_batch(std::size_t n, std::size_t len, Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
  SeriesBatch b(n, len);
  for (double& v : b.values) v = rng.uniform(lo, hi);
  return b;
}

}  // namespace

TEST_CASE("mean distance baseline fixtures") {
  SeriesBatch same(3, 4);
  for (std::size_t i = 0; i < same.count; ++i)
    for (std::size_t j = 0; j < 4; ++j) same.row_ptr(i)[j] = 1.5;
  Rng rng(3);
  CHECK(mean_distance_baseline(same, same, same, rng, 1000) == 0.0);

  // two distinct records at distance d, pooled as train/test/synth copies
  SeriesBatch a(1, 2), b(1, 2);
  a.row_ptr(0)[0] = 0.0;
  a.row_ptr(0)[1] = 0.0;
  b.row_ptr(0)[0] = 3.0;
  b.row_ptr(0)[1] = 4.0;  // distance 5
  Rng rng2(4);
  // pool {a, b, b}: pairs (a,b)=5, (a,b)=5, (b,b)=0 -> mean 10/3
  CHECK(mean_distance_baseline(a, b, b, rng2, 1000) == doctest::Approx(10.0 / 3.0));
}

TEST_CASE("sampled mean distance lands within 2% of the exact mean") {
  Rng rng(7);
  SeriesBatch train = random_batch(400, 8, rng);
  SeriesBatch test = random_batch(300, 8, rng);
  SeriesBatch synth = random_batch(300, 8, rng);

  Rng r_exact(1);
  const double exact = mean_distance_baseline(train, test, synth, r_exact, 1u << 30);
  Rng r_sampled(2);
  const double sampled = mean_distance_baseline(train, test, synth, r_sampled, 100000);
  CHECK(std::abs(sampled - exact) / exact < 0.02);
}

TEST_CASE("synth == train gives full recall for every cell") {
  Rng rng(11);
  SeriesBatch train = random_batch(60, 6, rng);
  SeriesBatch test = random_batch(60, 6, rng);

  AttackConfig cfg;
  cfg.r_values = {10, 25, 60};
  cfg.eps_fractions = {0.05, 0.2, 0.5};
  cfg.seed = 5;
  AttackReport rep = presence_disclosure(train, test, train, cfg);
  REQUIRE(rep.cells.size() == 9);
  for (const AttackCell& c : rep.cells) {
    CHECK(c.recall == 1.0);
    CHECK(c.tp == c.r);
    CHECK(c.fn == 0);
  }
}

TEST_CASE("distant synth gives zero claims and an absent precision") {
  Rng rng(13);
  SeriesBatch train = random_batch(40, 6, rng, 0.0, 1.0);
  SeriesBatch test = random_batch(40, 6, rng, 0.0, 1.0);
  SeriesBatch synth = random_batch(40, 6, rng, 100.0, 101.0);

  AttackConfig cfg;
  cfg.r_values = {20};
  cfg.eps_fractions = {0.05, 0.1};
  cfg.seed = 6;
  AttackReport rep = presence_disclosure(train, test, synth, cfg);
  for (const AttackCell& c : rep.cells) {
    CHECK(c.tp == 0);
    CHECK(c.fp == 0);
    CHECK(c.recall == 0.0);
    CHECK(!c.precision.has_value());
  }

  // csv leaves the precision cell empty
  std::string csv = report_to_csv(rep);
  CHECK(csv.find(",,") != std::string::npos);
  CHECK(csv.rfind("r,eps_fraction,tp,fp,tn,fn,precision,recall\n", 0) == 0);
}

TEST_CASE("recall is non-decreasing in eps and counts balance") {
  Rng rng(17);
  SeriesBatch train = random_batch(80, 5, rng);
  SeriesBatch test = random_batch(80, 5, rng);
  SeriesBatch synth = random_batch(120, 5, rng);

  AttackConfig cfg;
  cfg.r_values = {15, 40};
  for (int i = 1; i <= 10; ++i) cfg.eps_fractions.push_back(i / 20.0);
  cfg.seed = 21;
  AttackReport rep = presence_disclosure(train, test, synth, cfg);

  for (std::size_t r_ix = 0; r_ix < cfg.r_values.size(); ++r_ix) {
    double prev = -1.0;
    for (std::size_t e = 0; e < cfg.eps_fractions.size(); ++e) {
      const AttackCell& c = rep.cells[r_ix * cfg.eps_fractions.size() + e];
      CHECK(c.r == cfg.r_values[r_ix]);
      CHECK(c.tp + c.fn == c.r);
      CHECK(c.fp + c.tn == c.r);
      CHECK(c.recall >= prev);
      prev = c.recall;
    }
  }
}

TEST_CASE("attack report is deterministic for a fixed seed") {
  Rng rng(23);
  SeriesBatch train = random_batch(50, 4, rng);
  SeriesBatch test = random_batch(50, 4, rng);
  SeriesBatch synth = random_batch(70, 4, rng);
  AttackConfig cfg;
  cfg.r_values = {20};
  cfg.eps_fractions = {0.1, 0.3};
  cfg.seed = 31;
  AttackReport a = presence_disclosure(train, test, synth, cfg);
  AttackReport b = presence_disclosure(train, test, synth, cfg);
  CHECK(report_to_csv(a) == report_to_csv(b));
  CHECK(a.mean_distance == b.mean_distance);
}

TEST_CASE("infeasible r and bad grids are rejected") {
  Rng rng(29);
  SeriesBatch train = random_batch(10, 4, rng);
  SeriesBatch test = random_batch(10, 4, rng);
  SeriesBatch synth = random_batch(10, 4, rng);
  AttackConfig cfg;
  cfg.r_values = {11};
  cfg.eps_fractions = {0.1};
  CHECK_THROWS_WITH_AS(presence_disclosure(train, test, synth, cfg),
                       doctest::Contains("infeasible"), ValueError);
  cfg.r_values = {5};
  cfg.eps_fractions = {0.3, 0.1};  // not ascending
  CHECK_THROWS_AS(presence_disclosure(train, test, synth, cfg), ValueError);
}

TEST_CASE("independent synth keeps precision near one half when claims fire") {
  // equal-prior attacker on i.i.d. data: claimed matches split evenly between
  // train and test draws; light version of the acceptance calibration
  Rng rng(37);
  SeriesBatch train = random_batch(300, 4, rng, 0.0, 1.0);
  SeriesBatch test = random_batch(300, 4, rng, 0.0, 1.0);
  SeriesBatch synth = random_batch(300, 4, rng, 0.0, 1.0);

  AttackConfig cfg;
  cfg.r_values = {300};
  cfg.eps_fractions = {0.3, 0.4, 0.5};
  cfg.seed = 41;
  AttackReport rep = presence_disclosure(train, test, synth, cfg);
  for (const AttackCell& c : rep.cells) {
    if (c.tp + c.fp < 50) continue;
    CHECK(*c.precision > 0.35);
    CHECK(*c.precision < 0.65);
  }
}

TEST_CASE("default grids match the experiment protocols") {
  AttackConfig sine = sine_default_config();
  CHECK(sine.r_values.front() == 250);
  CHECK(sine.r_values.back() == 3000);
  CHECK(sine.eps_fractions.front() == doctest::Approx(0.05));
  CHECK(sine.eps_fractions.back() == doctest::Approx(0.5));
  AttackConfig ecg = ecg_default_config();
  CHECK(ecg.r_values.front() == 1000);
  CHECK(ecg.r_values.back() == 10000);
}
