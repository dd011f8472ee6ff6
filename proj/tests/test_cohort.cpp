#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "voleval/cohort.hpp"

using namespace voleval;

namespace {

LesionRow gt_row(const std::string& study, int id, bool detected, double diam,
                 double vol, double dice = 0.8, double nsd = 0.9,
                 double pred_shrink = 0.9) {
  LesionRow r;
  r.study_id = study;
  r.lesion_id = id;
  r.status = detected ? "TP" : "FN";
  r.gt_diameter_mm = diam;
  r.gt_volume_mm3 = vol;
  if (detected) {
    r.pred_diameter_mm = diam * pred_shrink;
    r.pred_volume_mm3 = vol * pred_shrink;
    r.dice = dice;
    r.nsd = nsd;
  }
  return r;
}

LesionRow fp_row(const std::string& study, int id, double diam) {
  LesionRow r;
  r.study_id = study;
  r.lesion_id = id;
  r.status = "FP";
  r.pred_diameter_mm = diam;
  r.pred_volume_mm3 = diam * diam;
  return r;
}

LesionRow empty_row(const std::string& study) {
  LesionRow r;
  r.study_id = study;
  r.status = "EMPTY";
  return r;
}

AggregateOptions fast_opts(std::uint64_t seed = 11) {
  AggregateOptions o;
  o.bootstrap_n = 400;
  o.seed = seed;
  return o;
}

// 142 studies, 124 lesions, 105 detected, 33 FPs: the bookkeeping shape
// of a detection test set.
std::vector<LesionRow> reference_cohort() {
  std::vector<LesionRow> rows;
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> diam(1.2, 8.0);
  int lesion = 0;
  int fp_budget = 33;
  for (int s = 0; s < 142; ++s) {
    char name[16];
    std::snprintf(name, sizeof(name), "case_%04d", s + 1);
    const bool positive = s < 101;
    int n_lesions = 0;
    if (positive) n_lesions = 1 + (s % 5 == 0 ? 1 : 0);  // 101 + 21 = 122
    if (s == 0 || s == 50) ++n_lesions;                  // -> 124 total
    for (int k = 0; k < n_lesions; ++k) {
      const bool detected = lesion >= 19;  // first 19 missed
      const double d = diam(rng);
      rows.push_back(gt_row(name, k + 1, detected, d, d * d * d));
      ++lesion;
    }
    if (fp_budget > 0 && s % 4 == 0) {
      rows.push_back(fp_row(name, 90, diam(rng)));
      --fp_budget;
    }
    if (rows.empty() || rows.back().study_id != name)
      rows.push_back(empty_row(name));
  }
  return rows;
}

}  // namespace

TEST_CASE("aggregate reproduces the headline arithmetic") {
  const auto rows = reference_cohort();
  const CohortReport rep = aggregate_cohort(rows, StratumSpec{}, fast_opts());

  CHECK(rep.n_studies == 142);
  CHECK(rep.n_gt_lesions == 124);
  CHECK(rep.n_tp == 105);
  CHECK(rep.n_fn == 19);
  CHECK(rep.n_fp == 33);
  REQUIRE(rep.sensitivity.has_value());
  CHECK(rep.sensitivity->point == doctest::Approx(105.0 / 124.0));
  CHECK(rep.fp_per_case.point == doctest::Approx(33.0 / 142.0));
  CHECK(rep.lesions_per_case == doctest::Approx(124.0 / 142.0));

  SUBCASE("bands are present for the default strata") {
    REQUIRE(rep.sensitivity_bands.size() == 3);
    CHECK(rep.sensitivity_bands[0].label == "<2mm");
    CHECK(rep.sensitivity_bands[1].label == "<4mm");
    CHECK(rep.sensitivity_bands[2].label == ">=4mm");
    REQUIRE(rep.fp_per_case_bands.size() == 3);
    for (const BandStat& b : rep.fp_per_case_bands)
      CHECK(b.value.has_value());  // always defined, zero counts included
  }

  SUBCASE("the overlapping <4mm band nests the <2mm band") {
    std::size_t n_lt2 = 0, n_lt4 = 0;
    for (const LesionRow& r : rows) {
      if (r.status != "TP" && r.status != "FN") continue;
      if (*r.gt_diameter_mm < 2.0) ++n_lt2;
      if (*r.gt_diameter_mm < 4.0) ++n_lt4;
    }
    CHECK(rep.sensitivity_bands[0].value->n == n_lt2);
    CHECK(rep.sensitivity_bands[1].value->n == n_lt4);
    CHECK(n_lt4 > n_lt2);
  }

  SUBCASE("disjoint bands recombine to the overall TP count") {
    StratumSpec disjoint;
    disjoint.mode = BandMode::Disjoint;
    const CohortReport d = aggregate_cohort(rows, disjoint, fast_opts());
    REQUIRE(d.sensitivity_bands.size() == 3);
    CHECK(d.sensitivity_bands[1].label == "2-4mm");
    double tp_sum = 0.0;
    std::size_t n_sum = 0;
    for (const BandStat& b : d.sensitivity_bands) {
      REQUIRE(b.value.has_value());
      tp_sum += b.value->point * static_cast<double>(b.value->n);
      n_sum += b.value->n;
    }
    CHECK(n_sum == d.n_gt_lesions);
    CHECK(tp_sum == doctest::Approx(static_cast<double>(d.n_tp)));
  }

  SUBCASE("aggregation is invariant under row permutation") {
    auto shuffled = rows;
    std::mt19937 rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const CohortReport a = aggregate_cohort(rows, StratumSpec{}, fast_opts());
    const CohortReport b =
        aggregate_cohort(shuffled, StratumSpec{}, fast_opts());
    CHECK(a.sensitivity->ci.lower == b.sensitivity->ci.lower);
    CHECK(a.sensitivity->ci.upper == b.sensitivity->ci.upper);
    CHECK(a.fp_per_case.ci.lower == b.fp_per_case.ci.lower);
    CHECK(a.mean_dice->ci.upper == b.mean_dice->ci.upper);
    CHECK(a.spearman_volume->ci.lower == b.spearman_volume->ci.lower);
  }
}

TEST_CASE("size-stratified extremes") {
  std::vector<LesionRow> rows;
  for (int i = 0; i < 10; ++i)
    rows.push_back(gt_row("a", i + 1, true, 5.0 + i * 0.1, 60.0));
  for (int i = 0; i < 6; ++i)
    rows.push_back(gt_row("b", i + 1, false, 1.0 + i * 0.1, 0.5));
  const CohortReport rep = aggregate_cohort(rows, StratumSpec{}, fast_opts());
  CHECK(rep.sensitivity_bands[0].value->point == doctest::Approx(0.0));
  CHECK(rep.sensitivity_bands[2].value->point == doctest::Approx(1.0));
  CHECK(rep.sensitivity->point == doctest::Approx(10.0 / 16.0));
  SUBCASE("a band with no lesions is absent, not zero") {
    StratumSpec wide;
    wide.boundaries_mm = {0.5};
    const CohortReport r2 = aggregate_cohort(rows, wide, fast_opts());
    CHECK_FALSE(r2.sensitivity_bands[0].value.has_value());
  }
}

TEST_CASE("empty cohort and degenerate cases") {
  CHECK_THROWS_AS(aggregate_cohort(std::vector<LesionRow>{}, StratumSpec{},
                                   fast_opts()),
                  EmptyCohortError);

  SUBCASE("negative-only cohort has no sensitivity but a zero fp rate") {
    std::vector<LesionRow> rows{empty_row("a"), empty_row("b")};
    const CohortReport rep =
        aggregate_cohort(rows, StratumSpec{}, fast_opts());
    CHECK_FALSE(rep.sensitivity.has_value());
    CHECK(rep.fp_per_case.point == 0.0);
    CHECK_FALSE(rep.mean_dice.has_value());
    CHECK_FALSE(rep.spearman_volume.has_value());
  }
}

TEST_CASE("cohort summary statistics") {
  // Five lesions: resampling three pairs would be degenerate too often
  // for the 1% skip budget and the whole aggregate would be rejected.
  std::vector<LesionRow> rows;
  rows.push_back(gt_row("a", 1, true, 2.0, 10.0));
  rows.push_back(gt_row("a", 2, true, 4.0, 20.0));
  rows.push_back(gt_row("b", 1, true, 6.0, 60.0));
  rows.push_back(gt_row("b", 2, true, 3.0, 15.0));
  rows.push_back(gt_row("c", 1, true, 5.0, 40.0));
  const CohortReport rep = aggregate_cohort(rows, StratumSpec{}, fast_opts());
  CHECK(rep.gt_diameter_mm.mean == doctest::Approx(4.0));
  CHECK(rep.gt_diameter_mm.median == doctest::Approx(4.0));
  CHECK(rep.gt_diameter_mm.sd ==
        doctest::Approx(std::sqrt(10.0 / 4.0)));
  CHECK(rep.gt_volume_mm3.median == doctest::Approx(20.0));
  REQUIRE(rep.spearman_volume.has_value());
  CHECK(rep.spearman_volume->point == doctest::Approx(1.0));

  SUBCASE("three near-constant pairs trip the degenerate-bootstrap policy") {
    std::vector<LesionRow> tiny{gt_row("a", 1, true, 2.0, 10.0),
                                gt_row("a", 2, true, 4.0, 20.0),
                                gt_row("b", 1, true, 6.0, 60.0)};
    CHECK_THROWS_AS(aggregate_cohort(tiny, StratumSpec{}, fast_opts()),
                    DegenerateStatisticsError);
  }
}

TEST_CASE("cumulative curves follow the >= threshold semantics") {
  std::vector<LesionRow> rows;
  // Detected iff diameter >= 4.
  rows.push_back(gt_row("a", 1, false, 1.5, 2.0));
  rows.push_back(gt_row("a", 2, false, 3.0, 10.0));
  rows.push_back(gt_row("b", 1, true, 4.5, 40.0, 0.7));
  rows.push_back(gt_row("b", 2, true, 6.0, 80.0, 0.9));
  rows.push_back(fp_row("a", 9, 2.5));
  rows.push_back(fp_row("c", 9, 5.0));
  rows.push_back(empty_row("d"));

  const auto pts = cumulative_curves(rows, {0.0, 4.0, 10.0});
  REQUIRE(pts.size() == 3);

  CHECK(pts[0].sensitivity == doctest::Approx(0.5));
  CHECK(pts[0].fp_per_case == doctest::Approx(2.0 / 4.0));
  CHECK(pts[0].mean_dice == doctest::Approx(0.8));

  CHECK(pts[1].sensitivity == doctest::Approx(1.0));
  CHECK(pts[1].fp_per_case == doctest::Approx(1.0 / 4.0));
  CHECK(pts[1].mean_dice == doctest::Approx(0.8));

  CHECK_FALSE(pts[2].sensitivity.has_value());
  CHECK(pts[2].fp_per_case == 0.0);
  CHECK_FALSE(pts[2].mean_dice.has_value());

  SUBCASE("thresholds must ascend") {
    CHECK_THROWS_AS(cumulative_curves(rows, {1.0, 1.0}), ConfigError);
  }
}

TEST_CASE("size correlation endpoints and oracle agreement") {
  SUBCASE("monotone predictions give rho 1") {
    std::vector<LesionRow> rows;
    for (int i = 0; i < 5; ++i)
      rows.push_back(gt_row("a", i + 1, true, 2.0 + i, 10.0 * (i + 1)));
    const auto [vol, diam] = size_correlation(rows);
    CHECK(vol.statistic == doctest::Approx(1.0));
    CHECK(diam.statistic == doctest::Approx(1.0));
  }
  SUBCASE("reversed predictions give rho -1") {
    std::vector<LesionRow> rows;
    for (int i = 0; i < 5; ++i) {
      LesionRow r = gt_row("a", i + 1, true, 2.0 + i, 10.0 * (i + 1));
      r.pred_volume_mm3 = 100.0 - 10.0 * i;
      r.pred_diameter_mm = 9.0 - i;
      rows.push_back(r);
    }
    const auto [vol, diam] = size_correlation(rows);
    CHECK(vol.statistic == doctest::Approx(-1.0));
    CHECK(diam.statistic == doctest::Approx(-1.0));
  }
  SUBCASE("fewer than 3 TPs is an error") {
    std::vector<LesionRow> rows{gt_row("a", 1, true, 2, 4),
                                gt_row("a", 2, true, 3, 9),
                                gt_row("a", 3, false, 4, 16)};
    CHECK_THROWS_AS(size_correlation(rows), InsufficientDataError);
  }
  SUBCASE("noisy cohort matches the rank oracle") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> noise(0.8, 1.2);
    std::vector<LesionRow> rows;
    std::vector<double> gv, pv;
    for (int i = 0; i < 30; ++i) {
      const double d = 1.0 + 0.3 * i;
      LesionRow r = gt_row("a", i + 1, true, d, d * d * d);
      r.pred_volume_mm3 = *r.gt_volume_mm3 * noise(rng);
      rows.push_back(r);
      gv.push_back(*rows.back().gt_volume_mm3);
      pv.push_back(*rows.back().pred_volume_mm3);
    }
    const auto [vol, diam] = size_correlation(rows);
    const auto want = oracle::spearman(gv, pv);
    CHECK(vol.statistic == doctest::Approx(want.statistic).epsilon(1e-12));
  }
}

TEST_CASE("strata validation") {
  StratumSpec bad;
  bad.boundaries_mm = {4.0, 2.0};
  CHECK_THROWS_AS(bad.bands(), ConfigError);
  bad.boundaries_mm = {-1.0};
  CHECK_THROWS_AS(bad.bands(), ConfigError);
  bad.boundaries_mm = {};
  CHECK_THROWS_AS(bad.bands(), ConfigError);
}
