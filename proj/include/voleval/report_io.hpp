#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voleval/cohort.hpp"

namespace voleval {

// Configuration echo embedded in report.json so every run is
// reproducible from its own output.
struct ConfigEcho {
  double tau_mm = 0.5;
  int connectivity = 26;
  std::vector<double> strata_boundaries_mm{2.0, 4.0};
  std::string band_mode = "overlapping";
  std::size_t bootstrap_n = 10000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  double binarize_threshold = 0.5;
};

// report.json: the full-precision CohortReport plus config, counts and
// warnings. Key order and number formatting are deterministic.
void write_report_json(const std::filesystem::path& path,
                       const CohortReport& report, const ConfigEcho& config,
                       const std::vector<std::string>& warnings);

// report.csv: display-rounded (2 decimals) rows of
// metric,stratum,point,lower,upper, one block per reported metric.
void write_report_csv(const std::filesystem::path& path,
                      const CohortReport& report);

// lesions.csv: one full-precision row per lesion (plus an EMPTY row for
// studies without lesions); the audit trail every other command reads.
void write_lesions_csv(const std::filesystem::path& path,
                       const std::vector<LesionRow>& rows);
std::vector<LesionRow> read_lesions_csv(const std::filesystem::path& path);

void write_curves_csv(const std::filesystem::path& path,
                      const std::vector<CurvePoint>& curves);

// Three-panel line plot (sensitivity, FP/case, mean DICE against the
// diameter threshold in mm).
std::string curves_svg(const std::vector<CurvePoint>& curves);

// Paired gt/pred sizes of detected lesions.
void write_scatter_csv(const std::filesystem::path& path,
                       const std::vector<LesionRow>& rows);

// Two-panel scatter (diameters, volumes) with identity line and
// Spearman rho annotations.
std::string scatter_svg(const std::vector<LesionRow>& rows, double rho_volume,
                        double rho_diameter);

void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace voleval
