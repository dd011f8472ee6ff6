#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voleval/errors.hpp"

namespace voleval::stats {

// All hypothesis tests are two-tailed.
struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  std::vector<std::size_t> n;
  bool degenerate = false;  // e.g. all observations identical
};

// Upper-tail survival functions used by the tests.
double normal_sf(double z);
double chi_square_sf(double x, double dof);
double student_t_sf(double t, double dof);

// Midranks (ties get the average of the ranks they span).
std::vector<double> midranks(std::span<const double> values);

// Pearson chi-square on a 2x2 table with 1 degree of freedom; no
// continuity correction unless yates is set. Throws
// DegenerateStatisticsError when a row or column margin is zero.
TestResult chi_square_2x2(const std::array<std::array<double, 2>, 2>& table,
                          bool yates = false);

// Pearson chi-square on an r x k contingency table, (r-1)(k-1) dof.
TestResult chi_square_contingency(
    const std::vector<std::vector<double>>& table);

// Mann-Whitney U with midrank tie handling. Exact two-sided p by
// enumeration of all n-choose-n1 group assignments when the combined
// sample size is at most exact_threshold; otherwise normal approximation
// with tie-corrected variance and continuity correction. When every
// pooled value is identical the result is degenerate with p = 1.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          std::size_t exact_threshold = 20);

// Kruskal-Wallis H with tie correction; p from chi-square with k-1 dof.
// All observations equal -> degenerate with p = 1.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Spearman rank correlation: Pearson correlation of midranks, p via the
// t approximation with n-2 dof. Throws DegenerateStatisticsError when
// either input has zero rank variance.
TestResult spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace voleval::stats
