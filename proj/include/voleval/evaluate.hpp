#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voleval/cohort.hpp"
#include "voleval/report_io.hpp"

namespace voleval {

// Batch evaluation configuration. Volumes are paired by filename stem
// (extension-stripped, case-sensitive) unless a phantom manifest is
// given. A gt file without a prediction is evaluated against an empty
// prediction (and logged); a prediction without a gt file is a
// configuration error.
struct RunConfig {
  std::filesystem::path gt_dir;
  std::filesystem::path pred_dir;
  std::optional<std::filesystem::path> manifest;
  std::filesystem::path out_dir = ".";
  double tau_mm = 0.5;
  Connectivity connectivity = Connectivity::TwentySix;
  StratumSpec strata;
  std::size_t bootstrap_n = 10000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double binarize_threshold = 0.5;
};

struct EvaluationOutput {
  CohortReport report;
  std::vector<LesionRow> rows;          // sorted by study id
  std::vector<std::string> warnings;    // missing predictions etc.
  std::vector<std::string> skipped;     // studies dropped for grid mismatch
};

// Evaluates every paired study and writes report.json, report.csv and
// lesions.csv under out_dir. Studies whose gt and prediction grids
// disagree are skipped with a recorded error; if more than 10% of
// studies are skipped the run fails.
EvaluationOutput run_evaluate(const RunConfig& config);

// Library form of the evaluation loop without any file output.
std::vector<LesionRow> evaluate_pairs(
    const std::vector<std::pair<std::filesystem::path,
                                std::optional<std::filesystem::path>>>& pairs,
    const std::vector<std::string>& study_ids, const RunConfig& config,
    std::vector<std::string>& warnings, std::vector<std::string>& skipped);

struct ComparisonEntry {
  std::string metric;
  std::string method;
  double statistic = 0.0;
  std::optional<double> p_value;  // absent when the test is degenerate
  bool significant = false;
  std::string note;
};

struct ComparisonResult {
  std::vector<std::string> labels;
  std::vector<std::size_t> tp_counts;
  std::vector<std::size_t> fn_counts;
  std::vector<ComparisonEntry> entries;
};

// Compares two or more runs over the same gt cohort: chi-square on the
// detected/missed contingency, Mann-Whitney (or Kruskal-Wallis for more
// than two runs) on per-lesion DICE/NSD/size-difference distributions.
// Cohort identity is verified from the lesion rows; mismatched cohorts
// raise IncomparableRunsError.
ComparisonResult compare_runs(
    const std::vector<std::vector<LesionRow>>& runs,
    const std::vector<std::string>& labels, double alpha = 0.05);

void write_comparison_json(const std::filesystem::path& path,
                           const ComparisonResult& result);

}  // namespace voleval
