// voleval: batch evaluation of 3D binary lesion masks.
//
// Subcommands: evaluate, compare, curves, scatter, phantom.
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 degenerate statistics.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "voleval/errors.hpp"
#include "voleval/evaluate.hpp"
#include "voleval/phantom.hpp"
#include "voleval/report_io.hpp"

namespace {

using namespace voleval;

std::vector<double> parse_number_list(const std::string& text,
                                      const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(std::string("cannot parse ") + what + ": " + text);
    }
  }
  if (out.empty())
    throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

Connectivity parse_connectivity(int c) {
  switch (c) {
    case 6: return Connectivity::Six;
    case 18: return Connectivity::Eighteen;
    case 26: return Connectivity::TwentySix;
    default: throw ConfigError("connectivity must be 6, 18 or 26");
  }
}

void print_report_summary(const CohortReport& r) {
  std::printf("studies: %zu (%zu positive), gt lesions: %zu\n", r.n_studies,
              r.n_positive_studies, r.n_gt_lesions);
  std::printf("TP %zu  FN %zu  FP %zu\n", r.n_tp, r.n_fn, r.n_fp);
  if (r.sensitivity)
    std::printf("sensitivity %.2f [%.2f, %.2f]\n", r.sensitivity->point,
                r.sensitivity->ci.lower, r.sensitivity->ci.upper);
  std::printf("FP/case     %.2f [%.2f, %.2f]\n", r.fp_per_case.point,
              r.fp_per_case.ci.lower, r.fp_per_case.ci.upper);
  if (r.mean_dice)
    std::printf("mean DICE   %.2f [%.2f, %.2f]\n", r.mean_dice->point,
                r.mean_dice->ci.lower, r.mean_dice->ci.upper);
  if (r.mean_nsd)
    std::printf("mean NSD    %.2f [%.2f, %.2f]\n", r.mean_nsd->point,
                r.mean_nsd->ci.lower, r.mean_nsd->ci.upper);
}

int dispatch(CLI::App& app, int argc, char** argv) {
  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DegenerateStatisticsError& e) {
    std::cerr << "degenerate statistics: " << e.what() << "\n";
    return 3;
  } catch (const InsufficientDataError& e) {
    std::cerr << "degenerate statistics: " << e.what() << "\n";
    return 3;
  } catch (const EvalError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lesion-wise evaluation of 3D binary segmentation masks"};
  app.require_subcommand(1);

  // evaluate ---------------------------------------------------------
  RunConfig cfg;
  std::string strata_text = "2,4";
  std::string band_mode = "overlapping";
  int connectivity = 26;
  std::string manifest_path;

  auto* evaluate = app.add_subcommand(
      "evaluate", "Evaluate predicted masks against ground truth");
  evaluate->add_option("--gt-dir", cfg.gt_dir, "Directory of gt volumes");
  evaluate->add_option("--pred-dir", cfg.pred_dir,
                       "Directory of predicted volumes");
  evaluate->add_option("--manifest", manifest_path,
                       "Phantom manifest.json (overrides directory pairing)");
  evaluate->add_option("--out-dir", cfg.out_dir, "Output directory");
  evaluate->add_option("--tau-mm", cfg.tau_mm, "NSD tolerance in mm")
      ->capture_default_str();
  evaluate->add_option("--connectivity", connectivity, "6, 18 or 26")
      ->capture_default_str();
  evaluate->add_option("--strata", strata_text,
                       "Diameter boundaries in mm, e.g. 2,4")
      ->capture_default_str();
  evaluate->add_option("--band-mode", band_mode, "overlapping or disjoint")
      ->capture_default_str();
  evaluate->add_option("--bootstrap-n", cfg.bootstrap_n, "Bootstrap resamples")
      ->capture_default_str();
  evaluate->add_option("--seed", cfg.seed, "Bootstrap RNG seed")
      ->capture_default_str();
  evaluate->add_option("--workers", cfg.workers, "Worker threads")
      ->capture_default_str();
  evaluate->add_option("--binarize-threshold", cfg.binarize_threshold,
                       "Foreground threshold applied to loaded volumes")
      ->capture_default_str();
  evaluate->callback([&]() {
    cfg.connectivity = parse_connectivity(connectivity);
    cfg.strata.boundaries_mm = parse_number_list(strata_text, "strata");
    if (band_mode == "overlapping")
      cfg.strata.mode = BandMode::Overlapping;
    else if (band_mode == "disjoint")
      cfg.strata.mode = BandMode::Disjoint;
    else
      throw ConfigError("band mode must be 'overlapping' or 'disjoint'");
    if (!manifest_path.empty()) cfg.manifest = manifest_path;
    if (!cfg.manifest && (cfg.gt_dir.empty() || cfg.pred_dir.empty()))
      throw ConfigError("evaluate needs --gt-dir and --pred-dir, or --manifest");
    const EvaluationOutput out = run_evaluate(cfg);
    for (const std::string& w : out.warnings)
      std::cerr << "warning: " << w << "\n";
    print_report_summary(out.report);
    std::printf("wrote %s\n", (cfg.out_dir / "report.json").c_str());
  });

  // compare ----------------------------------------------------------
  std::vector<std::string> lesion_files;
  std::vector<std::string> labels;
  std::string compare_out = "comparison.json";
  double alpha = 0.05;
  auto* compare = app.add_subcommand(
      "compare", "Test detection/segmentation differences between runs");
  compare->add_option("--lesions", lesion_files,
                      "lesions.csv files, one per run (2 or more)")
      ->required()
      ->expected(-2);
  compare->add_option("--labels", labels, "Run labels (default: file order)");
  compare->add_option("--out", compare_out, "Output JSON path")
      ->capture_default_str();
  compare->add_option("--alpha", alpha, "Significance level")
      ->capture_default_str();
  compare->callback([&]() {
    std::vector<std::vector<LesionRow>> runs;
    for (const std::string& f : lesion_files)
      runs.push_back(read_lesions_csv(f));
    if (labels.empty())
      for (std::size_t i = 0; i < runs.size(); ++i)
        labels.push_back("run_" + std::to_string(i + 1));
    const ComparisonResult result = compare_runs(runs, labels, alpha);
    write_comparison_json(compare_out, result);
    for (const ComparisonEntry& e : result.entries) {
      std::printf("%-18s %-22s stat %10.4f  p %s%s\n", e.metric.c_str(),
                  e.method.c_str(), e.statistic,
                  e.p_value ? std::to_string(*e.p_value).c_str() : "n/a",
                  e.significant ? "  *" : "");
    }
    std::printf("wrote %s\n", compare_out.c_str());
  });

  // curves -----------------------------------------------------------
  std::string curves_lesions;
  std::string curves_out_dir = ".";
  std::string thresholds_text;
  auto* curves = app.add_subcommand(
      "curves", "Diameter-dependent cumulative sensitivity/FP-rate/DICE");
  curves->add_option("--lesions", curves_lesions, "lesions.csv from evaluate")
      ->required();
  curves->add_option("--thresholds", thresholds_text,
                     "Ascending thresholds in mm, e.g. 0,1,2,4 "
                     "(default: 0 to max diameter in 0.5 steps)");
  curves->add_option("--out-dir", curves_out_dir, "Output directory")
      ->capture_default_str();
  curves->callback([&]() {
    const auto rows = read_lesions_csv(curves_lesions);
    if (rows.empty()) throw EmptyCohortError("lesions file has no rows");
    std::vector<double> thresholds;
    if (!thresholds_text.empty()) {
      thresholds = parse_number_list(thresholds_text, "thresholds");
    } else {
      double max_d = 0.0;
      for (const LesionRow& r : rows) {
        if (r.gt_diameter_mm) max_d = std::max(max_d, *r.gt_diameter_mm);
        if (r.pred_diameter_mm) max_d = std::max(max_d, *r.pred_diameter_mm);
      }
      for (double t = 0.0; t <= max_d + 0.5; t += 0.5)
        thresholds.push_back(t);
    }
    const auto pts = cumulative_curves(rows, thresholds);
    const std::filesystem::path dir = curves_out_dir;
    std::filesystem::create_directories(dir);
    write_curves_csv(dir / "curves.csv", pts);
    write_text_file(dir / "curves.svg", curves_svg(pts));
    std::printf("wrote %s and curves.svg\n", (dir / "curves.csv").c_str());
  });

  // scatter ----------------------------------------------------------
  std::string scatter_lesions;
  std::string scatter_out_dir = ".";
  auto* scatter = app.add_subcommand(
      "scatter", "True-vs-predicted size correlation plots");
  scatter->add_option("--lesions", scatter_lesions, "lesions.csv from evaluate")
      ->required();
  scatter->add_option("--out-dir", scatter_out_dir, "Output directory")
      ->capture_default_str();
  scatter->callback([&]() {
    const auto rows = read_lesions_csv(scatter_lesions);
    const auto [rho_vol, rho_diam] = size_correlation(rows);
    const std::filesystem::path dir = scatter_out_dir;
    std::filesystem::create_directories(dir);
    write_scatter_csv(dir / "scatter.csv", rows);
    write_text_file(dir / "scatter.svg",
                    scatter_svg(rows, rho_vol.statistic, rho_diam.statistic));
    std::printf("spearman rho: volumes %.4f (p=%.4g), diameters %.4f (p=%.4g)\n",
                rho_vol.statistic, rho_vol.p_value, rho_diam.statistic,
                rho_diam.p_value);
    std::printf("wrote %s and scatter.svg\n", (dir / "scatter.csv").c_str());
  });

  // phantom ----------------------------------------------------------
  phantom::CohortParams pp;
  std::string phantom_out = "phantom_cohort";
  std::string dims_text = "64,64,64";
  std::string spacing_text = "0.5,0.5,0.5";
  std::string gap_text;
  bool no_gzip = false;
  auto* phantom_cmd = app.add_subcommand(
      "phantom", "Generate a synthetic cohort with known lesion geometry");
  phantom_cmd->add_option("--out-dir", phantom_out, "Cohort directory")
      ->capture_default_str();
  phantom_cmd->add_option("--positive", pp.n_positive, "Positive studies")
      ->capture_default_str();
  phantom_cmd->add_option("--negative", pp.n_negative, "Negative studies")
      ->capture_default_str();
  phantom_cmd->add_option("--lesions", pp.n_lesions, "Total gt lesions")
      ->capture_default_str();
  phantom_cmd->add_option("--dropped", pp.n_dropped,
                          "Lesions omitted from predictions (-> FN)")
      ->capture_default_str();
  phantom_cmd->add_option("--false-positives", pp.n_false_positive,
                          "Prediction-only components (-> FP)")
      ->capture_default_str();
  phantom_cmd->add_option("--diameter-min", pp.diameter_min_mm,
                          "Smallest sampled diameter [mm]")
      ->capture_default_str();
  phantom_cmd->add_option("--diameter-max", pp.diameter_max_mm,
                          "Largest sampled diameter [mm]")
      ->capture_default_str();
  phantom_cmd->add_option("--drop-below-diameter", pp.drop_below_diameter_mm,
                          "Drop every lesion below this diameter [mm]")
      ->capture_default_str();
  phantom_cmd->add_option("--diameter-gap", gap_text,
                          "Excluded diameter interval lo,hi [mm]");
  phantom_cmd->add_option("--dims", dims_text, "Study grid dims, e.g. 64,64,64")
      ->capture_default_str();
  phantom_cmd->add_option("--spacing", spacing_text,
                          "Voxel spacing in mm, e.g. 0.5,0.5,0.5")
      ->capture_default_str();
  phantom_cmd->add_option("--seed", pp.seed, "Generator seed")
      ->capture_default_str();
  phantom_cmd->add_flag("--no-gzip", no_gzip, "Write plain .nii files");
  phantom_cmd->callback([&]() {
    const auto dims = parse_number_list(dims_text, "dims");
    const auto spacing = parse_number_list(spacing_text, "spacing");
    if (dims.size() != 3 || spacing.size() != 3)
      throw ConfigError("--dims and --spacing need three components");
    for (int a = 0; a < 3; ++a) {
      pp.study_dims[a] = static_cast<int>(dims[a]);
      pp.spacing[a] = spacing[a];
    }
    if (!gap_text.empty()) {
      const auto gap = parse_number_list(gap_text, "diameter gap");
      if (gap.size() != 2) throw ConfigError("--diameter-gap needs lo,hi");
      pp.gap_lo_mm = gap[0];
      pp.gap_hi_mm = gap[1];
    }
    pp.gzip = !no_gzip;
    const auto manifest = phantom::generate_cohort(pp, phantom_out);
    std::printf("generated %zu studies, %d lesions (tp %d, fn %d, fp %d)\n",
                manifest.studies.size(), manifest.total_lesions,
                manifest.total_tp, manifest.total_fn, manifest.total_fp);
    std::printf("wrote %s\n",
                (std::filesystem::path(phantom_out) / "manifest.json").c_str());
  });

  return dispatch(app, argc, argv);
}
