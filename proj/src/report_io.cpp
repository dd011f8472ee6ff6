#include "voleval/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "voleval/errors.hpp"

namespace voleval {

namespace {

using nlohmann::json;

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

json ci_json(const CiStat& s) {
  return json{{"point", s.point},
              {"lower", s.ci.lower},
              {"upper", s.ci.upper},
              {"n", s.n},
              {"n_resamples", s.ci.n_resamples},
              {"skipped_resamples", s.ci.n_skipped}};
}

json opt_ci_json(const std::optional<CiStat>& s) {
  return s ? ci_json(*s) : json(nullptr);
}

json bands_json(const std::vector<BandStat>& bands) {
  json arr = json::array();
  for (const BandStat& b : bands)
    arr.push_back(json{{"label", b.label}, {"value", opt_ci_json(b.value)}});
  return arr;
}

json summary_json(const SummaryStat& s) {
  return json{{"mean", s.mean}, {"sd", s.sd}, {"median", s.median}};
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void csv_stat_rows(std::ostream& os, const std::string& metric,
                   const std::optional<CiStat>& overall,
                   const std::vector<BandStat>& bands) {
  const auto row = [&](const std::string& stratum,
                       const std::optional<CiStat>& v) {
    os << metric << "," << stratum << ",";
    if (v)
      os << fixed2(v->point) << "," << fixed2(v->ci.lower) << ","
         << fixed2(v->ci.upper);
    else
      os << ",,";
    os << "\n";
  };
  row("all", overall);
  for (const BandStat& b : bands) row(b.label, b.value);
}

std::string opt_full(const std::optional<double>& v) {
  return v ? full(*v) : std::string();
}

std::optional<double> parse_opt(const std::string& field) {
  if (field.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str()) return std::nullopt;
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Minimal deterministic line-plot canvas.
struct Panel {
  double x0, y0, w, h;           // plot area in canvas units
  double xmin, xmax, ymin, ymax;  // data range

  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void svg_axes(std::ostringstream& os, const Panel& p, const std::string& title,
              const std::string& xlabel, const std::string& ylabel) {
  os << "<rect x=\"" << svg_num(p.x0) << "\" y=\"" << svg_num(p.y0)
     << "\" width=\"" << svg_num(p.w) << "\" height=\"" << svg_num(p.h)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << svg_num(p.x0 + p.w / 2) << "\" y=\""
     << svg_num(p.y0 - 8)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  os << "<text x=\"" << svg_num(p.x0 + p.w / 2) << "\" y=\""
     << svg_num(p.y0 + p.h + 32)
     << "\" text-anchor=\"middle\" font-size=\"11\">" << xlabel << "</text>\n";
  os << "<text x=\"" << svg_num(p.x0 - 38) << "\" y=\""
     << svg_num(p.y0 + p.h / 2) << "\" text-anchor=\"middle\" font-size=\"11\""
     << " transform=\"rotate(-90 " << svg_num(p.x0 - 38) << " "
     << svg_num(p.y0 + p.h / 2) << ")\">" << ylabel << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = p.xmin + (p.xmax - p.xmin) * i / 4.0;
    const double fy = p.ymin + (p.ymax - p.ymin) * i / 4.0;
    os << "<line x1=\"" << svg_num(p.px(fx)) << "\" y1=\""
       << svg_num(p.y0 + p.h) << "\" x2=\"" << svg_num(p.px(fx)) << "\" y2=\""
       << svg_num(p.y0 + p.h + 4) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << svg_num(p.px(fx)) << "\" y=\""
       << svg_num(p.y0 + p.h + 16)
       << "\" text-anchor=\"middle\" font-size=\"9\">" << svg_num(fx)
       << "</text>\n";
    os << "<line x1=\"" << svg_num(p.x0 - 4) << "\" y1=\"" << svg_num(p.py(fy))
       << "\" x2=\"" << svg_num(p.x0) << "\" y2=\"" << svg_num(p.py(fy))
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << svg_num(p.x0 - 6) << "\" y=\""
       << svg_num(p.py(fy) + 3)
       << "\" text-anchor=\"end\" font-size=\"9\">" << svg_num(fy)
       << "</text>\n";
  }
}

void svg_polyline(std::ostringstream& os, const Panel& p,
                  const std::vector<std::pair<double, double>>& pts,
                  const std::string& color) {
  if (pts.empty()) return;
  os << "<polyline fill=\"none\" stroke=\"" << color
     << "\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts)
    os << svg_num(p.px(x)) << "," << svg_num(p.py(y)) << " ";
  os << "\"/>\n";
}

}  // namespace

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  auto out = open_out(path);
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_report_json(const std::filesystem::path& path,
                       const CohortReport& report, const ConfigEcho& config,
                       const std::vector<std::string>& warnings) {
  json j;
  j["schema_version"] = 1;
  j["config"] = {{"tau_mm", config.tau_mm},
                 {"connectivity", config.connectivity},
                 {"strata_boundaries_mm", config.strata_boundaries_mm},
                 {"band_mode", config.band_mode},
                 {"bootstrap_n", config.bootstrap_n},
                 {"confidence", config.confidence},
                 {"seed", config.seed},
                 {"binarize_threshold", config.binarize_threshold},
                 {"rng", "splitmix64"}};
  j["counts"] = {{"n_studies", report.n_studies},
                 {"n_positive_studies", report.n_positive_studies},
                 {"n_gt_lesions", report.n_gt_lesions},
                 {"tp", report.n_tp},
                 {"fn", report.n_fn},
                 {"fp", report.n_fp}};
  j["cohort_summary"] = {{"gt_diameter_mm", summary_json(report.gt_diameter_mm)},
                         {"gt_volume_mm3", summary_json(report.gt_volume_mm3)},
                         {"lesions_per_case", report.lesions_per_case}};
  j["detection"] = {
      {"sensitivity",
       {{"overall", opt_ci_json(report.sensitivity)},
        {"bands", bands_json(report.sensitivity_bands)}}},
      {"fp_per_case",
       {{"overall", ci_json(report.fp_per_case)},
        {"bands", bands_json(report.fp_per_case_bands)}}}};
  j["segmentation"] = {{"mean_dice", opt_ci_json(report.mean_dice)},
                       {"mean_nsd", opt_ci_json(report.mean_nsd)}};
  j["size"] = {
      {"mean_volume_diff_mm3", opt_ci_json(report.mean_volume_diff_mm3)},
      {"mean_diameter_diff_mm", opt_ci_json(report.mean_diameter_diff_mm)},
      {"spearman_volume", opt_ci_json(report.spearman_volume)},
      {"spearman_diameter", opt_ci_json(report.spearman_diameter)}};
  json curves = json::array();
  for (const CurvePoint& p : report.curves) {
    curves.push_back(
        {{"threshold_mm", p.threshold_mm},
         {"sensitivity", p.sensitivity ? json(*p.sensitivity) : json(nullptr)},
         {"fp_per_case", p.fp_per_case},
         {"mean_dice", p.mean_dice ? json(*p.mean_dice) : json(nullptr)}});
  }
  j["curves"] = std::move(curves);
  j["resampling_units"] = {{"sensitivity", "lesion"},
                           {"fp_per_case", "study"},
                           {"dice", "lesion"},
                           {"nsd", "lesion"},
                           {"size_differences", "lesion"},
                           {"spearman", "lesion"}};
  j["warnings"] = warnings;

  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_report_csv(const std::filesystem::path& path,
                      const CohortReport& report) {
  auto out = open_out(path);
  std::ostringstream os;
  os << "metric,stratum,point,lower,upper\n";
  csv_stat_rows(os, "sensitivity", report.sensitivity,
                report.sensitivity_bands);
  csv_stat_rows(os, "fp_per_case", report.fp_per_case,
                report.fp_per_case_bands);
  csv_stat_rows(os, "dice", report.mean_dice, {});
  csv_stat_rows(os, "nsd", report.mean_nsd, {});
  csv_stat_rows(os, "volume_diff_mm3", report.mean_volume_diff_mm3, {});
  csv_stat_rows(os, "diameter_diff_mm", report.mean_diameter_diff_mm, {});
  csv_stat_rows(os, "spearman_volume", report.spearman_volume, {});
  csv_stat_rows(os, "spearman_diameter", report.spearman_diameter, {});
  out << os.str();
}

void write_lesions_csv(const std::filesystem::path& path,
                       const std::vector<LesionRow>& rows) {
  auto out = open_out(path);
  out << "study_id,lesion_id,status,gt_diameter_mm,gt_volume_mm3,"
         "pred_diameter_mm,pred_volume_mm3,dice,nsd\n";
  for (const LesionRow& r : rows) {
    out << r.study_id << "," << r.lesion_id << "," << r.status << ","
        << opt_full(r.gt_diameter_mm) << "," << opt_full(r.gt_volume_mm3)
        << "," << opt_full(r.pred_diameter_mm) << ","
        << opt_full(r.pred_volume_mm3) << "," << opt_full(r.dice) << ","
        << opt_full(r.nsd) << "\n";
  }
}

std::vector<LesionRow> read_lesions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lesions file: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("empty lesions file: " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() != 9 || header[0] != "study_id")
    throw FormatError("unexpected lesions file header: " + path.string());

  std::vector<LesionRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9)
      throw FormatError("malformed lesions row: " + line);
    LesionRow r;
    r.study_id = f[0];
    r.lesion_id = static_cast<int>(std::strtol(f[1].c_str(), nullptr, 10));
    r.status = f[2];
    r.gt_diameter_mm = parse_opt(f[3]);
    r.gt_volume_mm3 = parse_opt(f[4]);
    r.pred_diameter_mm = parse_opt(f[5]);
    r.pred_volume_mm3 = parse_opt(f[6]);
    r.dice = parse_opt(f[7]);
    r.nsd = parse_opt(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_curves_csv(const std::filesystem::path& path,
                      const std::vector<CurvePoint>& curves) {
  auto out = open_out(path);
  out << "threshold_mm,sensitivity,fp_per_case,mean_dice\n";
  for (const CurvePoint& p : curves) {
    out << full(p.threshold_mm) << ",";
    if (p.sensitivity) out << full(*p.sensitivity);
    out << "," << full(p.fp_per_case) << ",";
    if (p.mean_dice) out << full(*p.mean_dice);
    out << "\n";
  }
}

std::string curves_svg(const std::vector<CurvePoint>& curves) {
  double tmax = 1.0, fpmax = 0.1;
  for (const CurvePoint& p : curves) {
    tmax = std::max(tmax, p.threshold_mm);
    fpmax = std::max(fpmax, p.fp_per_case);
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1020\" "
        "height=\"320\" font-family=\"sans-serif\">\n";

  const Panel panels[3] = {
      {60, 40, 240, 220, 0, tmax, 0, 1},
      {400, 40, 240, 220, 0, tmax, 0, fpmax * 1.05},
      {740, 40, 240, 220, 0, tmax, 0, 1}};
  const char* titles[3] = {"Cumulative sensitivity", "Cumulative FP/case",
                           "Cumulative mean DICE"};
  const char* ylabels[3] = {"sensitivity", "FP/case", "mean DICE"};
  for (int k = 0; k < 3; ++k) {
    svg_axes(os, panels[k], titles[k], "diameter threshold [mm]", ylabels[k]);
    std::vector<std::pair<double, double>> pts;
    for (const CurvePoint& p : curves) {
      std::optional<double> v;
      if (k == 0) v = p.sensitivity;
      else if (k == 1) v = p.fp_per_case;
      else v = p.mean_dice;
      if (v) pts.emplace_back(p.threshold_mm, *v);
    }
    svg_polyline(os, panels[k], pts, k == 1 ? "#c0392b" : "#2471a3");
  }
  os << "</svg>\n";
  return os.str();
}

void write_scatter_csv(const std::filesystem::path& path,
                       const std::vector<LesionRow>& rows) {
  auto out = open_out(path);
  out << "study_id,lesion_id,gt_diameter_mm,pred_diameter_mm,gt_volume_mm3,"
         "pred_volume_mm3\n";
  for (const LesionRow& r : rows) {
    if (r.status != "TP") continue;
    out << r.study_id << "," << r.lesion_id << "," << full(*r.gt_diameter_mm)
        << "," << full(*r.pred_diameter_mm) << "," << full(*r.gt_volume_mm3)
        << "," << full(*r.pred_volume_mm3) << "\n";
  }
}

std::string scatter_svg(const std::vector<LesionRow>& rows, double rho_volume,
                        double rho_diameter) {
  double dmax = 1.0, vmax = 1.0;
  for (const LesionRow& r : rows) {
    if (r.status != "TP") continue;
    dmax = std::max({dmax, *r.gt_diameter_mm, *r.pred_diameter_mm});
    vmax = std::max({vmax, *r.gt_volume_mm3, *r.pred_volume_mm3});
  }
  dmax *= 1.05;
  vmax *= 1.05;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"700\" "
        "height=\"340\" font-family=\"sans-serif\">\n";
  const Panel panels[2] = {{60, 40, 240, 240, 0, dmax, 0, dmax},
                           {400, 40, 240, 240, 0, vmax, 0, vmax}};
  const char* titles[2] = {"Maximal diameter [mm]", "Volume [mm3]"};
  const double rhos[2] = {rho_diameter, rho_volume};
  for (int k = 0; k < 2; ++k) {
    svg_axes(os, panels[k], titles[k], "ground truth", "prediction");
    os << "<line x1=\"" << svg_num(panels[k].px(panels[k].xmin)) << "\" y1=\""
       << svg_num(panels[k].py(panels[k].ymin)) << "\" x2=\""
       << svg_num(panels[k].px(panels[k].xmax)) << "\" y2=\""
       << svg_num(panels[k].py(panels[k].ymax))
       << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    for (const LesionRow& r : rows) {
      if (r.status != "TP") continue;
      const double gx = k == 0 ? *r.gt_diameter_mm : *r.gt_volume_mm3;
      const double py = k == 0 ? *r.pred_diameter_mm : *r.pred_volume_mm3;
      os << "<circle cx=\"" << svg_num(panels[k].px(gx)) << "\" cy=\""
         << svg_num(panels[k].py(py))
         << "\" r=\"2.5\" fill=\"#2471a3\" fill-opacity=\"0.7\"/>\n";
    }
    os << "<text x=\"" << svg_num(panels[k].x0 + 8) << "\" y=\""
       << svg_num(panels[k].y0 + 16) << "\" font-size=\"11\">spearman rho = "
       << svg_num(rhos[k]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace voleval
