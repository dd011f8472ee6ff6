#include "voleval/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "voleval/parallel.hpp"
#include "voleval/rng.hpp"

namespace voleval::stats {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::nan("");
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

BootstrapCI bootstrap_ci(std::size_t n_items, const IndexReducer& reducer,
                         const BootstrapOptions& opts) {
  if (n_items == 0)
    throw InsufficientDataError("bootstrap_ci needs nonempty data");
  if (opts.n_resamples < 100)
    throw InsufficientDataError("bootstrap_ci needs >= 100 resamples");

  // Point estimate on the identity resample.
  std::vector<std::size_t> identity(n_items);
  for (std::size_t i = 0; i < n_items; ++i) identity[i] = i;
  const auto point = reducer(identity);
  if (!point)
    throw DegenerateStatisticsError(
        "statistic undefined on the original sample");

  std::vector<std::optional<double>> values(opts.n_resamples);
  parallel_for(opts.n_resamples, opts.n_workers, [&](std::size_t r) {
    SplitMix64 rng = substream(opts.seed, r);
    std::vector<std::size_t> idx(n_items);
    for (std::size_t i = 0; i < n_items; ++i)
      idx[i] = static_cast<std::size_t>(rng.next_below(n_items));
    values[r] = reducer(idx);
  });

  std::vector<double> kept;
  kept.reserve(opts.n_resamples);
  std::size_t skipped = 0;
  for (const auto& v : values) {
    if (v)
      kept.push_back(*v);
    else
      ++skipped;
  }
  if (static_cast<double>(skipped) >
      0.01 * static_cast<double>(opts.n_resamples))
    throw DegenerateStatisticsError(
        "bootstrap degenerate: " + std::to_string(skipped) + " of " +
        std::to_string(opts.n_resamples) + " resamples undefined");

  std::sort(kept.begin(), kept.end());
  const double alpha = 1.0 - opts.confidence;
  BootstrapCI ci;
  ci.point = *point;
  ci.lower = quantile_sorted(kept, alpha / 2.0);
  ci.upper = quantile_sorted(kept, 1.0 - alpha / 2.0);
  ci.n_resamples = opts.n_resamples;
  ci.confidence = opts.confidence;
  ci.seed = opts.seed;
  ci.n_skipped = skipped;
  return ci;
}

}  // namespace voleval::stats
