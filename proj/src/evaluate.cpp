#include "voleval/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>

#include <json.hpp>

#include "voleval/errors.hpp"
#include "voleval/nifti.hpp"
#include "voleval/parallel.hpp"

namespace voleval {

namespace {

bool has_volume_extension(const std::filesystem::path& p) {
  const std::string name = p.filename().string();
  return name.ends_with(".nii") || name.ends_with(".nii.gz");
}

std::string stem_of(const std::filesystem::path& p) {
  std::string name = p.filename().string();
  if (name.ends_with(".nii.gz")) return name.substr(0, name.size() - 7);
  if (name.ends_with(".nii")) return name.substr(0, name.size() - 4);
  return name;
}

using StudyPair =
    std::pair<std::filesystem::path, std::optional<std::filesystem::path>>;

void pairs_from_directories(const RunConfig& config,
                            std::vector<StudyPair>& pairs,
                            std::vector<std::string>& ids,
                            std::vector<std::string>& warnings) {
  if (!std::filesystem::is_directory(config.gt_dir))
    throw ConfigError("gt directory not found: " + config.gt_dir.string());
  if (!std::filesystem::is_directory(config.pred_dir))
    throw ConfigError("pred directory not found: " + config.pred_dir.string());

  std::map<std::string, std::filesystem::path> gt, pred;
  for (const auto& e : std::filesystem::directory_iterator(config.gt_dir))
    if (e.is_regular_file() && has_volume_extension(e.path()))
      gt[stem_of(e.path())] = e.path();
  for (const auto& e : std::filesystem::directory_iterator(config.pred_dir))
    if (e.is_regular_file() && has_volume_extension(e.path()))
      pred[stem_of(e.path())] = e.path();

  for (const auto& [stem, path] : pred)
    if (!gt.count(stem))
      throw ConfigError("prediction without ground truth: " + path.string());

  for (const auto& [stem, path] : gt) {
    std::optional<std::filesystem::path> p;
    const auto it = pred.find(stem);
    if (it != pred.end()) {
      p = it->second;
    } else {
      warnings.push_back("missing prediction for study '" + stem +
                         "'; treated as empty");
    }
    pairs.emplace_back(path, p);
    ids.push_back(stem);
  }
  if (pairs.empty())
    throw EmptyCohortError("no volumes found in " + config.gt_dir.string());
}

void pairs_from_manifest(const std::filesystem::path& manifest_path,
                         std::vector<StudyPair>& pairs,
                         std::vector<std::string>& ids) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest: " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest is not valid JSON: " + std::string(e.what()));
  }
  const auto base = manifest_path.parent_path();
  if (!j.contains("studies"))
    throw FormatError("manifest has no 'studies' array");
  for (const auto& s : j["studies"]) {
    ids.push_back(s.at("id").get<std::string>());
    std::optional<std::filesystem::path> p;
    if (s.contains("pred") && !s["pred"].get<std::string>().empty())
      p = base / s["pred"].get<std::string>();
    pairs.emplace_back(base / s.at("gt").get<std::string>(), p);
  }
  if (pairs.empty()) throw EmptyCohortError("manifest lists no studies");
}

}  // namespace

std::vector<LesionRow> evaluate_pairs(const std::vector<StudyPair>& pairs,
                                      const std::vector<std::string>& study_ids,
                                      const RunConfig& config,
                                      std::vector<std::string>& warnings,
                                      std::vector<std::string>& skipped) {
  struct StudyResult {
    std::vector<LesionRow> rows;
    std::string skip_reason;
  };
  std::vector<StudyResult> results(pairs.size());

  parallel_for(pairs.size(), config.workers, [&](std::size_t i) {
    const auto& [gt_path, pred_path] = pairs[i];
    const VoxelGrid gt_grid = load_volume(gt_path);
    const BinaryMask gt_mask = binarize(gt_grid, config.binarize_threshold);

    BinaryMask pred_mask;
    if (pred_path) {
      const VoxelGrid pred_grid = load_volume(*pred_path);
      if (!gt_grid.same_geometry(pred_grid)) {
        results[i].skip_reason = "grid mismatch between gt and prediction";
        return;
      }
      pred_mask = binarize(pred_grid, config.binarize_threshold);
    } else {
      VoxelGrid empty = make_uint8_grid(gt_grid.dims, gt_grid.spacing,
                                        gt_grid.origin);
      pred_mask = binarize(empty, config.binarize_threshold);
    }

    const LesionSet gt_set = connected_components(gt_mask, config.connectivity);
    const LesionSet pred_set =
        connected_components(pred_mask, config.connectivity);
    StudyEvaluation eval = study_metrics(gt_set, pred_set, config.tau_mm);
    eval.study_id = study_ids[i];
    results[i].rows = flatten_study(eval);
  });

  // Deterministic assembly in sorted study-id order.
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return study_ids[a] < study_ids[b];
  });

  std::vector<LesionRow> rows;
  for (std::size_t i : order) {
    if (!results[i].skip_reason.empty()) {
      skipped.push_back(study_ids[i] + ": " + results[i].skip_reason);
      warnings.push_back("skipped study '" + study_ids[i] +
                         "': " + results[i].skip_reason);
      continue;
    }
    rows.insert(rows.end(), std::make_move_iterator(results[i].rows.begin()),
                std::make_move_iterator(results[i].rows.end()));
  }

  if (!pairs.empty() &&
      static_cast<double>(skipped.size()) >
          0.10 * static_cast<double>(pairs.size()))
    throw IncompatibleGridsError(
        std::to_string(skipped.size()) + " of " + std::to_string(pairs.size()) +
        " studies skipped for grid mismatch");
  return rows;
}

EvaluationOutput run_evaluate(const RunConfig& config) {
  std::vector<StudyPair> pairs;
  std::vector<std::string> ids;
  EvaluationOutput out;

  if (config.manifest)
    pairs_from_manifest(*config.manifest, pairs, ids);
  else
    pairs_from_directories(config, pairs, ids, out.warnings);

  out.rows = evaluate_pairs(pairs, ids, config, out.warnings, out.skipped);

  AggregateOptions agg;
  agg.bootstrap_n = config.bootstrap_n;
  agg.confidence = config.confidence;
  agg.seed = config.seed;
  agg.n_workers = config.workers;
  out.report = aggregate_cohort(out.rows, config.strata, agg);

  ConfigEcho echo;
  echo.tau_mm = config.tau_mm;
  echo.connectivity = static_cast<int>(config.connectivity);
  echo.strata_boundaries_mm = config.strata.boundaries_mm;
  echo.band_mode =
      config.strata.mode == BandMode::Overlapping ? "overlapping" : "disjoint";
  echo.bootstrap_n = config.bootstrap_n;
  echo.confidence = config.confidence;
  echo.seed = config.seed;
  echo.binarize_threshold = config.binarize_threshold;

  std::filesystem::create_directories(config.out_dir);
  write_report_json(config.out_dir / "report.json", out.report, echo,
                    out.warnings);
  write_report_csv(config.out_dir / "report.csv", out.report);
  write_lesions_csv(config.out_dir / "lesions.csv", out.rows);
  return out;
}

namespace {

// Cohort identity: same study ids and the same gt lesion ids per study.
std::map<std::string, std::set<int>> gt_signature(
    const std::vector<LesionRow>& rows) {
  std::map<std::string, std::set<int>> sig;
  for (const LesionRow& r : rows) {
    sig[r.study_id];  // every study participates
    if (r.status == "TP" || r.status == "FN") sig[r.study_id].insert(r.lesion_id);
  }
  return sig;
}

std::vector<double> tp_values(const std::vector<LesionRow>& rows,
                              double (*getter)(const LesionRow&)) {
  std::vector<double> v;
  for (const LesionRow& r : rows)
    if (r.status == "TP") v.push_back(getter(r));
  return v;
}

ComparisonEntry from_test(const std::string& metric,
                          const stats::TestResult& t, double alpha) {
  ComparisonEntry e;
  e.metric = metric;
  e.method = t.method;
  e.statistic = t.statistic;
  e.p_value = t.p_value;
  e.significant = !t.degenerate && t.p_value < alpha;
  if (t.degenerate) e.note = "degenerate sample";
  return e;
}

}  // namespace

ComparisonResult compare_runs(const std::vector<std::vector<LesionRow>>& runs,
                              const std::vector<std::string>& labels,
                              double alpha) {
  if (runs.size() < 2)
    throw ConfigError("compare needs at least two runs");
  if (labels.size() != runs.size())
    throw ConfigError("one label per run required");

  const auto reference = gt_signature(runs[0]);
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (gt_signature(runs[i]) != reference)
      throw IncomparableRunsError(
          "runs were not evaluated on the same gt cohort");

  ComparisonResult result;
  result.labels = labels;

  std::vector<std::vector<double>> table;  // run x {detected, missed}
  for (const auto& run : runs) {
    std::size_t tp = 0, fn = 0;
    for (const LesionRow& r : run) {
      if (r.status == "TP") ++tp;
      if (r.status == "FN") ++fn;
    }
    result.tp_counts.push_back(tp);
    result.fn_counts.push_back(fn);
    table.push_back({static_cast<double>(tp), static_cast<double>(fn)});
  }

  try {
    const auto chi = runs.size() == 2
                         ? stats::chi_square_2x2({{{table[0][0], table[0][1]},
                                                   {table[1][0], table[1][1]}}})
                         : stats::chi_square_contingency(table);
    result.entries.push_back(from_test("detection", chi, alpha));
  } catch (const DegenerateStatisticsError& e) {
    ComparisonEntry entry;
    entry.metric = "detection";
    entry.method = "chi_square";
    entry.note = e.what();
    result.entries.push_back(std::move(entry));
  }

  struct MetricDef {
    const char* name;
    double (*getter)(const LesionRow&);
  };
  const MetricDef defs[] = {
      {"dice", [](const LesionRow& r) { return *r.dice; }},
      {"nsd", [](const LesionRow& r) { return *r.nsd; }},
      {"volume_diff_mm3",
       [](const LesionRow& r) { return *r.gt_volume_mm3 - *r.pred_volume_mm3; }},
      {"diameter_diff_mm",
       [](const LesionRow& r) {
         return *r.gt_diameter_mm - *r.pred_diameter_mm;
       }},
  };
  for (const MetricDef& def : defs) {
    std::vector<std::vector<double>> groups;
    bool any_empty = false;
    for (const auto& run : runs) {
      groups.push_back(tp_values(run, def.getter));
      any_empty = any_empty || groups.back().empty();
    }
    ComparisonEntry entry;
    if (any_empty) {
      entry.metric = def.name;
      entry.method = runs.size() == 2 ? "mann_whitney_u" : "kruskal_wallis";
      entry.note = "no detected lesions in at least one run";
      result.entries.push_back(std::move(entry));
      continue;
    }
    const auto t = runs.size() == 2
                       ? stats::mann_whitney_u(groups[0], groups[1])
                       : stats::kruskal_wallis(groups);
    result.entries.push_back(from_test(def.name, t, alpha));
  }
  return result;
}

void write_comparison_json(const std::filesystem::path& path,
                           const ComparisonResult& result) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["labels"] = result.labels;
  j["detected"] = result.tp_counts;
  j["missed"] = result.fn_counts;
  nlohmann::json tests = nlohmann::json::array();
  for (const ComparisonEntry& e : result.entries) {
    nlohmann::json t;
    t["metric"] = e.metric;
    t["method"] = e.method;
    t["statistic"] = e.statistic;
    t["p_value"] = e.p_value ? nlohmann::json(*e.p_value)
                             : nlohmann::json(nullptr);
    t["significant"] = e.significant;
    if (!e.note.empty()) t["note"] = e.note;
    tests.push_back(std::move(t));
  }
  j["tests"] = std::move(tests);

  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write comparison: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace voleval
