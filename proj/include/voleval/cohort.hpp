#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voleval/bootstrap.hpp"
#include "voleval/matching.hpp"
#include "voleval/stats.hpp"

namespace voleval {

// One lesion-level record; the complete intermediate representation of
// an evaluation run (what lesions.csv carries). Studies without any
// lesion contribute a single EMPTY row so per-case denominators stay
// recoverable from the rows alone.
struct LesionRow {
  std::string study_id;
  int lesion_id = 0;   // gt id for TP/FN rows, prediction id for FP rows
  std::string status;  // "TP", "FN", "FP" or "EMPTY"
  std::optional<double> gt_diameter_mm, gt_volume_mm3;
  std::optional<double> pred_diameter_mm, pred_volume_mm3;
  std::optional<double> dice, nsd;
};

std::vector<LesionRow> flatten_study(const StudyEvaluation& study);

enum class BandMode { Overlapping, Disjoint };

// Diameter strata. Overlapping mode nests the "below" bands, i.e. for
// boundaries [2,4]: "<2mm", "<4mm" (includes <2mm) and ">=4mm".
// Disjoint mode produces "<2mm", "2-4mm", ">=4mm".
struct StratumSpec {
  std::vector<double> boundaries_mm{2.0, 4.0};
  BandMode mode = BandMode::Overlapping;

  struct Band {
    std::string label;
    double lo = 0.0;  // inclusive
    double hi = 0.0;  // exclusive; infinity for the top band
    bool contains(double d) const { return d >= lo && d < hi; }
  };
  std::vector<Band> bands() const;  // validates boundaries
};

struct CiStat {
  double point = 0.0;
  stats::BootstrapCI ci;
  std::size_t n = 0;  // resampling-unit sample size behind the point
};

struct BandStat {
  std::string label;
  std::optional<CiStat> value;  // absent when the band has no members
};

struct CurvePoint {
  double threshold_mm = 0.0;
  std::optional<double> sensitivity;  // absent when no gt lesion qualifies
  double fp_per_case = 0.0;
  std::optional<double> mean_dice;    // absent when no TP qualifies
};

struct SummaryStat {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  double median = 0.0;
};

struct AggregateOptions {
  std::size_t bootstrap_n = 10000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  unsigned n_workers = 1;
};

// Aggregated detection / segmentation / size statistics in the layout
// of a detection-study report: overall and per-stratum rates with
// percentile-bootstrap intervals, per-lesion metric means, rank
// correlations, cohort size summary and cumulative curves.
struct CohortReport {
  std::size_t n_studies = 0;
  std::size_t n_positive_studies = 0;
  std::size_t n_gt_lesions = 0;
  std::size_t n_tp = 0, n_fn = 0, n_fp = 0;

  // Sensitivity strata are keyed by gt lesion diameter, FP/case strata
  // by predicted component diameter. Negative studies count in every
  // per-case denominator.
  std::optional<CiStat> sensitivity;
  std::vector<BandStat> sensitivity_bands;
  CiStat fp_per_case;
  std::vector<BandStat> fp_per_case_bands;

  std::optional<CiStat> mean_dice, mean_nsd;
  std::optional<CiStat> mean_volume_diff_mm3, mean_diameter_diff_mm;
  std::optional<CiStat> spearman_volume, spearman_diameter;

  SummaryStat gt_diameter_mm;
  SummaryStat gt_volume_mm3;
  double lesions_per_case = 0.0;

  std::vector<CurvePoint> curves;
};

// Throws EmptyCohortError when rows are empty. The bootstrap resampling
// unit is the lesion for sensitivity/DICE/NSD/size metrics and the
// study for FP/case.
CohortReport aggregate_cohort(const std::vector<LesionRow>& rows,
                              const StratumSpec& strata,
                              const AggregateOptions& opts);

CohortReport aggregate_cohort(const std::vector<StudyEvaluation>& studies,
                              const StratumSpec& strata,
                              const AggregateOptions& opts);

// At threshold t: sensitivity over gt lesions with diameter >= t,
// FP/case over predictions with diameter >= t, mean DICE over detected
// gt lesions with diameter >= t. Empty selections yield absent values,
// never zero.
std::vector<CurvePoint> cumulative_curves(const std::vector<LesionRow>& rows,
                                          const std::vector<double>& thresholds);

// Spearman rho between gt and predicted volumes, and between gt and
// predicted diameters, over detected lesions. Requires >= 3 TP rows.
std::pair<stats::TestResult, stats::TestResult> size_correlation(
    const std::vector<LesionRow>& rows);

}  // namespace voleval
