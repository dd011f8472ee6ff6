#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "voleval/errors.hpp"

namespace voleval::stats {

struct BootstrapCI {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n_resamples = 0;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  std::size_t n_skipped = 0;
};

struct BootstrapOptions {
  std::size_t n_resamples = 10000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  unsigned n_workers = 1;
};

// Statistic over a resampled index multiset (indices into the caller's
// data, drawn with replacement). Returning nullopt skips the resample.
using IndexReducer =
    std::function<std::optional<double>(std::span<const std::size_t>)>;

// Nonparametric percentile bootstrap. Resample r draws its indices from
// substream(seed, r), so results are bit-identical for any worker count.
// Interval bounds are linear-interpolation percentiles of the resampled
// statistic. If more than 1% of resamples are skipped the statistic is
// considered degenerate and DegenerateStatisticsError is thrown.
BootstrapCI bootstrap_ci(std::size_t n_items, const IndexReducer& reducer,
                         const BootstrapOptions& opts);

// Linear-interpolation quantile of a sorted sample (position q*(n-1)).
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace voleval::stats
