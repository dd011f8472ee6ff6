#include "voleval/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "voleval/rng.hpp"

namespace voleval {

namespace {

std::string format_mm(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Fixed tags keep every metric on its own bootstrap stream.
enum SeedTag : std::uint64_t {
  kSeedSensitivity = 100,
  kSeedSensitivityBand = 110,  // +band index
  kSeedFpPerCase = 200,
  kSeedFpPerCaseBand = 210,
  kSeedDice = 300,
  kSeedNsd = 301,
  kSeedVolumeDiff = 302,
  kSeedDiameterDiff = 303,
  kSeedSpearmanVolume = 304,
  kSeedSpearmanDiameter = 305,
};

stats::BootstrapOptions bs_options(const AggregateOptions& opts,
                                   std::uint64_t tag) {
  stats::BootstrapOptions b;
  b.n_resamples = opts.bootstrap_n;
  b.confidence = opts.confidence;
  b.seed = derive_seed(opts.seed, tag);
  b.n_workers = opts.n_workers;
  return b;
}

CiStat mean_rate_ci(std::vector<double> values, const AggregateOptions& opts,
                    std::uint64_t tag) {
  // Canonical value order makes the interval invariant under any
  // permutation of the input data.
  std::sort(values.begin(), values.end());
  const auto reducer =
      [&values](std::span<const std::size_t> idx) -> std::optional<double> {
    double sum = 0.0;
    for (std::size_t i : idx) sum += values[i];
    return sum / static_cast<double>(idx.size());
  };
  CiStat s;
  s.ci = stats::bootstrap_ci(values.size(), reducer, bs_options(opts, tag));
  s.point = s.ci.point;
  s.n = values.size();
  return s;
}

SummaryStat summarize(std::vector<double> v) {
  SummaryStat s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  return s;
}

std::vector<std::size_t> identity_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

std::vector<double> default_thresholds(const std::vector<LesionRow>& rows) {
  double max_d = 0.0;
  for (const LesionRow& r : rows) {
    if (r.gt_diameter_mm) max_d = std::max(max_d, *r.gt_diameter_mm);
    if (r.pred_diameter_mm) max_d = std::max(max_d, *r.pred_diameter_mm);
  }
  std::vector<double> t;
  for (double x = 0.0; x <= max_d + 0.5; x += 0.5) t.push_back(x);
  return t;
}

}  // namespace

std::vector<LesionRow> flatten_study(const StudyEvaluation& study) {
  std::vector<LesionRow> rows;
  for (const GtLesionRecord& g : study.gt_lesions) {
    LesionRow r;
    r.study_id = study.study_id;
    r.lesion_id = g.gt_id;
    r.status = g.detected ? "TP" : "FN";
    r.gt_diameter_mm = g.gt_diameter_mm;
    r.gt_volume_mm3 = g.gt_volume_mm3;
    if (g.metrics) {
      r.pred_diameter_mm = g.metrics->pred_diameter_mm;
      r.pred_volume_mm3 = g.metrics->pred_volume_mm3;
      r.dice = g.metrics->dice;
      r.nsd = g.metrics->nsd;
    }
    rows.push_back(std::move(r));
  }
  for (const FpLesionRecord& f : study.false_positives) {
    LesionRow r;
    r.study_id = study.study_id;
    r.lesion_id = f.pred_id;
    r.status = "FP";
    r.pred_diameter_mm = f.diameter_mm;
    r.pred_volume_mm3 = f.volume_mm3;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) {
    LesionRow r;
    r.study_id = study.study_id;
    r.status = "EMPTY";
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<StratumSpec::Band> StratumSpec::bands() const {
  if (boundaries_mm.empty())
    throw ConfigError("strata need at least one boundary");
  for (std::size_t i = 0; i < boundaries_mm.size(); ++i) {
    if (!(boundaries_mm[i] > 0.0))
      throw ConfigError("strata boundaries must be positive");
    if (i > 0 && !(boundaries_mm[i] > boundaries_mm[i - 1]))
      throw ConfigError("strata boundaries must be strictly ascending");
  }
  std::vector<Band> out;
  for (std::size_t i = 0; i < boundaries_mm.size(); ++i) {
    Band b;
    b.hi = boundaries_mm[i];
    if (mode == BandMode::Overlapping || i == 0) {
      b.lo = 0.0;
      b.label = "<" + format_mm(b.hi) + "mm";
    } else {
      b.lo = boundaries_mm[i - 1];
      b.label = format_mm(b.lo) + "-" + format_mm(b.hi) + "mm";
    }
    out.push_back(std::move(b));
  }
  Band top;
  top.lo = boundaries_mm.back();
  top.hi = std::numeric_limits<double>::infinity();
  top.label = ">=" + format_mm(top.lo) + "mm";
  out.push_back(std::move(top));
  return out;
}

CohortReport aggregate_cohort(const std::vector<LesionRow>& rows,
                              const StratumSpec& strata,
                              const AggregateOptions& opts) {
  if (rows.empty()) throw EmptyCohortError("no studies to aggregate");
  const auto bands = strata.bands();

  CohortReport rep;
  std::set<std::string> study_ids;
  std::set<std::string> positive_ids;
  std::vector<const LesionRow*> gt_rows, tp_rows;
  std::map<std::string, std::vector<double>> fp_diameters_by_study;
  for (const LesionRow& r : rows) {
    study_ids.insert(r.study_id);
    if (r.status == "TP" || r.status == "FN") {
      gt_rows.push_back(&r);
      positive_ids.insert(r.study_id);
      if (r.status == "TP") tp_rows.push_back(&r);
    } else if (r.status == "FP") {
      fp_diameters_by_study[r.study_id].push_back(
          r.pred_diameter_mm.value_or(0.0));
    }
  }
  rep.n_studies = study_ids.size();
  rep.n_positive_studies = positive_ids.size();
  rep.n_gt_lesions = gt_rows.size();
  rep.n_tp = tp_rows.size();
  rep.n_fn = rep.n_gt_lesions - rep.n_tp;
  for (const auto& [id, ds] : fp_diameters_by_study) rep.n_fp += ds.size();

  // Sensitivity: lesion-level resampling of detection indicators.
  const auto sensitivity_stat =
      [&](const std::vector<const LesionRow*>& subset,
          std::uint64_t tag) -> std::optional<CiStat> {
    if (subset.empty()) return std::nullopt;
    std::vector<double> hits;
    hits.reserve(subset.size());
    for (const LesionRow* r : subset)
      hits.push_back(r->status == "TP" ? 1.0 : 0.0);
    return mean_rate_ci(hits, opts, tag);
  };
  rep.sensitivity = sensitivity_stat(gt_rows, kSeedSensitivity);
  for (std::size_t b = 0; b < bands.size(); ++b) {
    std::vector<const LesionRow*> subset;
    for (const LesionRow* r : gt_rows)
      if (bands[b].contains(r->gt_diameter_mm.value_or(0.0)))
        subset.push_back(r);
    BandStat bs;
    bs.label = bands[b].label;
    bs.value = sensitivity_stat(subset, kSeedSensitivityBand + b);
    rep.sensitivity_bands.push_back(std::move(bs));
  }

  // FP/case: study-level resampling of per-study counts; studies without
  // predictions (including negative studies) contribute zeros.
  const std::vector<std::string> all_ids(study_ids.begin(), study_ids.end());
  const auto fp_stat = [&](const StratumSpec::Band* band,
                           std::uint64_t tag) -> CiStat {
    std::vector<double> counts;
    counts.reserve(all_ids.size());
    for (const std::string& id : all_ids) {
      double c = 0.0;
      const auto it = fp_diameters_by_study.find(id);
      if (it != fp_diameters_by_study.end())
        for (double d : it->second)
          if (!band || band->contains(d)) c += 1.0;
      counts.push_back(c);
    }
    return mean_rate_ci(counts, opts, tag);
  };
  rep.fp_per_case = fp_stat(nullptr, kSeedFpPerCase);
  for (std::size_t b = 0; b < bands.size(); ++b) {
    BandStat bs;
    bs.label = bands[b].label;
    bs.value = fp_stat(&bands[b], kSeedFpPerCaseBand + b);
    rep.fp_per_case_bands.push_back(std::move(bs));
  }

  // Per-lesion segmentation and size metrics over detected lesions.
  const auto tp_mean = [&](auto getter, std::uint64_t tag)
      -> std::optional<CiStat> {
    if (tp_rows.empty()) return std::nullopt;
    std::vector<double> v;
    v.reserve(tp_rows.size());
    for (const LesionRow* r : tp_rows) v.push_back(getter(*r));
    return mean_rate_ci(v, opts, tag);
  };
  rep.mean_dice =
      tp_mean([](const LesionRow& r) { return *r.dice; }, kSeedDice);
  rep.mean_nsd = tp_mean([](const LesionRow& r) { return *r.nsd; }, kSeedNsd);
  rep.mean_volume_diff_mm3 = tp_mean(
      [](const LesionRow& r) { return *r.gt_volume_mm3 - *r.pred_volume_mm3; },
      kSeedVolumeDiff);
  rep.mean_diameter_diff_mm =
      tp_mean([](const LesionRow& r) {
        return *r.gt_diameter_mm - *r.pred_diameter_mm;
      }, kSeedDiameterDiff);

  // Rank correlations between true and predicted sizes.
  if (tp_rows.size() >= 3) {
    const auto rho_ci = [&](auto getter_x, auto getter_y, std::uint64_t tag)
        -> std::optional<CiStat> {
      std::vector<std::pair<double, double>> pairs;
      for (const LesionRow* r : tp_rows)
        pairs.emplace_back(getter_x(*r), getter_y(*r));
      std::sort(pairs.begin(), pairs.end());
      std::vector<double> xs, ys;
      for (const auto& [x, y] : pairs) {
        xs.push_back(x);
        ys.push_back(y);
      }
      const auto reducer =
          [&](std::span<const std::size_t> idx) -> std::optional<double> {
        std::vector<double> rx, ry;
        rx.reserve(idx.size());
        ry.reserve(idx.size());
        for (std::size_t i : idx) {
          rx.push_back(xs[i]);
          ry.push_back(ys[i]);
        }
        try {
          return stats::spearman_rho(rx, ry).statistic;
        } catch (const DegenerateStatisticsError&) {
          return std::nullopt;
        }
      };
      if (!reducer(identity_indices(xs.size())))
        return std::nullopt;  // zero rank variance: correlation undefined
      CiStat s;
      s.ci = stats::bootstrap_ci(xs.size(), reducer, bs_options(opts, tag));
      s.point = s.ci.point;
      s.n = xs.size();
      return s;
    };
    rep.spearman_volume =
        rho_ci([](const LesionRow& r) { return *r.gt_volume_mm3; },
               [](const LesionRow& r) { return *r.pred_volume_mm3; },
               kSeedSpearmanVolume);
    rep.spearman_diameter =
        rho_ci([](const LesionRow& r) { return *r.gt_diameter_mm; },
               [](const LesionRow& r) { return *r.pred_diameter_mm; },
               kSeedSpearmanDiameter);
  }

  // Cohort size summary over all gt lesions.
  {
    std::vector<double> ds, vs;
    for (const LesionRow* r : gt_rows) {
      ds.push_back(r->gt_diameter_mm.value_or(0.0));
      vs.push_back(r->gt_volume_mm3.value_or(0.0));
    }
    rep.gt_diameter_mm = summarize(std::move(ds));
    rep.gt_volume_mm3 = summarize(std::move(vs));
    rep.lesions_per_case = static_cast<double>(rep.n_gt_lesions) /
                           static_cast<double>(rep.n_studies);
  }

  rep.curves = cumulative_curves(rows, default_thresholds(rows));
  return rep;
}

CohortReport aggregate_cohort(const std::vector<StudyEvaluation>& studies,
                              const StratumSpec& strata,
                              const AggregateOptions& opts) {
  std::vector<LesionRow> rows;
  for (const StudyEvaluation& s : studies) {
    auto r = flatten_study(s);
    rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  }
  return aggregate_cohort(rows, strata, opts);
}

std::vector<CurvePoint> cumulative_curves(
    const std::vector<LesionRow>& rows,
    const std::vector<double>& thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw ConfigError("curve thresholds must be strictly ascending");

  std::set<std::string> study_ids;
  for (const LesionRow& r : rows) study_ids.insert(r.study_id);
  const double n_cases = static_cast<double>(study_ids.size());

  std::vector<CurvePoint> out;
  for (double t : thresholds) {
    CurvePoint p;
    p.threshold_mm = t;
    std::size_t gt_n = 0, gt_tp = 0, fp_n = 0;
    double dice_sum = 0.0;
    std::size_t dice_n = 0;
    for (const LesionRow& r : rows) {
      if (r.status == "TP" || r.status == "FN") {
        if (r.gt_diameter_mm.value_or(0.0) >= t) {
          ++gt_n;
          if (r.status == "TP") {
            ++gt_tp;
            dice_sum += *r.dice;
            ++dice_n;
          }
        }
      } else if (r.status == "FP") {
        if (r.pred_diameter_mm.value_or(0.0) >= t) ++fp_n;
      }
    }
    if (gt_n > 0)
      p.sensitivity = static_cast<double>(gt_tp) / static_cast<double>(gt_n);
    p.fp_per_case = n_cases > 0 ? static_cast<double>(fp_n) / n_cases : 0.0;
    if (dice_n > 0) p.mean_dice = dice_sum / static_cast<double>(dice_n);
    out.push_back(p);
  }
  return out;
}

std::pair<stats::TestResult, stats::TestResult> size_correlation(
    const std::vector<LesionRow>& rows) {
  std::vector<double> gv, pv, gd, pd;
  for (const LesionRow& r : rows)
    if (r.status == "TP") {
      gv.push_back(*r.gt_volume_mm3);
      pv.push_back(*r.pred_volume_mm3);
      gd.push_back(*r.gt_diameter_mm);
      pd.push_back(*r.pred_diameter_mm);
    }
  if (gv.size() < 3)
    throw InsufficientDataError(
        "size correlation needs >= 3 detected lesions");
  return {stats::spearman_rho(gv, pv), stats::spearman_rho(gd, pd)};
}

}  // namespace voleval
