#include "voleval/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "voleval/lesions.hpp"
#include "voleval/nifti.hpp"
#include "voleval/rng.hpp"

namespace voleval::phantom {

namespace {

bool inside_shape(const ShapeSpec& s, double px, double py, double pz) {
  const double dx = (px - s.center_mm[0]) / s.radii_mm[0];
  const double dy = (py - s.center_mm[1]) / s.radii_mm[1];
  const double dz = (pz - s.center_mm[2]) / s.radii_mm[2];
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

AnalyticLesion analytic_of(const ShapeSpec& s) {
  AnalyticLesion a;
  a.volume_mm3 = 4.0 / 3.0 * std::numbers::pi * s.radii_mm[0] *
                 s.radii_mm[1] * s.radii_mm[2];
  a.diameter_mm =
      2.0 * std::max({s.radii_mm[0], s.radii_mm[1], s.radii_mm[2]});
  return a;
}

BinaryMask morph6(const BinaryMask& mask, int steps, bool dilating) {
  BinaryMask out = mask;
  const auto& dims = mask.grid.dims;
  static constexpr int off[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                    {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  for (int step = 0; step < steps; ++step) {
    const std::vector<std::uint8_t> cur = out.values();
    auto& next = out.values();
    std::int64_t i = 0;
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x, ++i) {
          if (dilating && cur[i]) continue;   // stays set
          if (!dilating && !cur[i]) continue; // stays clear
          bool hit = false;
          for (const auto& d : off) {
            const int nx = x + d[0], ny = y + d[1], nz = z + d[2];
            const bool in_grid = nx >= 0 && ny >= 0 && nz >= 0 &&
                                 nx < dims[0] && ny < dims[1] && nz < dims[2];
            const bool nb = in_grid && cur[out.grid.index_of(nx, ny, nz)];
            if (dilating ? nb : !nb) {
              hit = true;
              break;
            }
          }
          if (hit) next[i] = dilating ? 1 : 0;
        }
  }
  return out;
}

}  // namespace

BinaryMask dilate6(const BinaryMask& mask, int steps) {
  return morph6(mask, steps, true);
}

BinaryMask erode6(const BinaryMask& mask, int steps) {
  return morph6(mask, steps, false);
}

std::pair<BinaryMask, std::vector<AnalyticLesion>> rasterize(
    const PhantomSpec& spec) {
  BinaryMask mask;
  mask.grid = make_uint8_grid(spec.dims, spec.spacing, spec.origin);
  auto& vox = mask.values();

  std::vector<std::int32_t> owner(vox.size(), 0);
  std::vector<AnalyticLesion> analytic;
  analytic.reserve(spec.shapes.size());

  for (std::size_t si = 0; si < spec.shapes.size(); ++si) {
    const ShapeSpec& s = spec.shapes[si];
    for (int a = 0; a < 3; ++a) {
      if (!(s.radii_mm[a] > 0.0))
        throw GenerationError("shape radius must be positive");
      const double lo = spec.origin[a] + spec.spacing[a];
      const double hi = spec.origin[a] + (spec.dims[a] - 2) * spec.spacing[a];
      if (s.center_mm[a] - s.radii_mm[a] < lo ||
          s.center_mm[a] + s.radii_mm[a] > hi)
        throw GenerationError("shape out of bounds (needs a 1-voxel margin)");
    }

    // Voxel index range covering the shape's bounding box.
    int lo_idx[3], hi_idx[3];
    for (int a = 0; a < 3; ++a) {
      lo_idx[a] = static_cast<int>(std::floor(
          (s.center_mm[a] - s.radii_mm[a] - spec.origin[a]) / spec.spacing[a]));
      hi_idx[a] = static_cast<int>(std::ceil(
          (s.center_mm[a] + s.radii_mm[a] - spec.origin[a]) / spec.spacing[a]));
      lo_idx[a] = std::max(lo_idx[a], 0);
      hi_idx[a] = std::min(hi_idx[a], spec.dims[a] - 1);
    }

    std::size_t count = 0;
    for (int z = lo_idx[2]; z <= hi_idx[2]; ++z)
      for (int y = lo_idx[1]; y <= hi_idx[1]; ++y)
        for (int x = lo_idx[0]; x <= hi_idx[0]; ++x) {
          const double px = spec.origin[0] + x * spec.spacing[0];
          const double py = spec.origin[1] + y * spec.spacing[1];
          const double pz = spec.origin[2] + z * spec.spacing[2];
          if (!inside_shape(s, px, py, pz)) continue;
          const std::int64_t i = mask.grid.index_of(x, y, z);
          if (owner[i] != 0)
            throw GenerationError("shapes overlap after rasterization");
          owner[i] = static_cast<std::int32_t>(si + 1);
          vox[i] = 1;
          ++count;
        }
    if (count == 0)
      throw GenerationError("shape covers no voxel center");
    analytic.push_back(analytic_of(s));
  }

  // Shapes must stay separable as connected components: reject any pair
  // of 26-adjacent voxels with different owners.
  const auto& dims = spec.dims;
  std::int64_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i) {
        if (!owner[i]) continue;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = x + dx, ny = y + dy, nz = z + dz;
              if (nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] ||
                  ny >= dims[1] || nz >= dims[2])
                continue;
              const std::int32_t o = owner[mask.grid.index_of(nx, ny, nz)];
              if (o != 0 && o != owner[i])
                throw GenerationError("rasterized shapes touch");
            }
      }

  return {std::move(mask), std::move(analytic)};
}

BinaryMask perturb(const BinaryMask& gt, const PhantomSpec& spec) {
  const Perturbation& p = spec.perturbation;
  BinaryMask out = gt;
  const auto& dims = gt.grid.dims;

  int shift[3];
  bool any_shift = false;
  for (int a = 0; a < 3; ++a) {
    shift[a] = static_cast<int>(std::lround(p.offset_mm[a] / gt.grid.spacing[a]));
    any_shift = any_shift || shift[a] != 0;
  }
  if (any_shift) {
    std::vector<std::uint8_t> shifted(out.values().size(), 0);
    const auto& src = out.values();
    std::int64_t i = 0;
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x, ++i) {
          if (!src[i]) continue;
          const int nx = x + shift[0], ny = y + shift[1], nz = z + shift[2];
          if (nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] || ny >= dims[1] ||
              nz >= dims[2])
            continue;
          shifted[out.grid.index_of(nx, ny, nz)] = 1;
        }
    out.values() = std::move(shifted);
  }

  if (spec.perturbation.morph_steps > 0)
    out = dilate6(out, spec.perturbation.morph_steps);
  else if (spec.perturbation.morph_steps < 0)
    out = erode6(out, -spec.perturbation.morph_steps);

  if (p.drop_one) {
    const LesionSet components =
        connected_components(out, Connectivity::TwentySix);
    if (!components.lesions.empty()) {
      SplitMix64 rng(spec.seed);
      const std::size_t victim = static_cast<std::size_t>(
          rng.next_below(components.lesions.size()));
      auto& vox = out.values();
      for (const Coord& c : components.lesions[victim].voxels)
        vox[out.grid.index_of(c.x, c.y, c.z)] = 0;
    }
  }
  return out;
}

namespace {

// Fixed placement slots: the eight {0.28, 0.72} corners of the study
// volume. Ground-truth lesions use slots 0-3, false positives 4-5;
// corner separation is wide enough that 4 mm shapes can never touch.
std::array<double, 3> slot_center(const CohortParams& p, int slot) {
  static constexpr double frac[8][3] = {
      {0.28, 0.28, 0.28}, {0.72, 0.72, 0.28}, {0.28, 0.72, 0.72},
      {0.72, 0.28, 0.72}, {0.72, 0.28, 0.28}, {0.28, 0.72, 0.28},
      {0.28, 0.28, 0.72}, {0.72, 0.72, 0.72}};
  std::array<double, 3> c;
  for (int a = 0; a < 3; ++a)
    c[a] = frac[slot][a] * p.study_dims[a] * p.spacing[a];
  return c;
}

constexpr int kMaxGtPerStudy = 4;
constexpr int kMaxFpPerStudy = 2;

struct PlannedShape {
  ShapeSpec shape;
  double analytic_diameter = 0.0;
  bool dropped = false;
};

std::string study_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "case_%04d", index + 1);
  return buf;
}

double sample_diameter(SplitMix64& rng, const CohortParams& p) {
  const double lo = std::log(p.diameter_min_mm);
  const double hi = std::log(p.diameter_max_mm);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double d = std::exp(lo + (hi - lo) * rng.next_double());
    if (p.gap_hi_mm > p.gap_lo_mm && d >= p.gap_lo_mm && d < p.gap_hi_mm)
      continue;
    return d;
  }
  throw GenerationError("diameter sampling failed; gap excludes the range");
}

ShapeSpec make_shape(SplitMix64& rng, const CohortParams& p, int slot,
                     double diameter_mm, bool ellipsoid) {
  ShapeSpec s;
  s.center_mm = slot_center(p, slot);
  for (int a = 0; a < 3; ++a)
    s.center_mm[a] += (rng.next_double() - 0.5) * 0.6 * p.spacing[a];
  if (ellipsoid) {
    s.kind = ShapeSpec::Kind::Ellipsoid;
    const int major = static_cast<int>(rng.next_below(3));
    const double ratio = 1.1 + 0.5 * rng.next_double();
    for (int a = 0; a < 3; ++a)
      s.radii_mm[a] = a == major ? diameter_mm / 2.0
                                 : diameter_mm / (2.0 * ratio);
  } else {
    s.kind = ShapeSpec::Kind::Sphere;
    s.radii_mm = {diameter_mm / 2.0, diameter_mm / 2.0, diameter_mm / 2.0};
  }
  return s;
}

void write_manifest(const CohortManifest& m,
                    const std::filesystem::path& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["params"] = {
      {"n_positive", m.params.n_positive},
      {"n_negative", m.params.n_negative},
      {"n_lesions", m.params.n_lesions},
      {"n_dropped", m.params.n_dropped},
      {"n_false_positive", m.params.n_false_positive},
      {"diameter_min_mm", m.params.diameter_min_mm},
      {"diameter_max_mm", m.params.diameter_max_mm},
      {"drop_below_diameter_mm", m.params.drop_below_diameter_mm},
      {"gap_lo_mm", m.params.gap_lo_mm},
      {"gap_hi_mm", m.params.gap_hi_mm},
      {"study_dims", m.params.study_dims},
      {"spacing", m.params.spacing},
      {"gzip", m.params.gzip},
      {"seed", m.params.seed}};
  nlohmann::json studies = nlohmann::json::array();
  for (const StudyManifest& s : m.studies) {
    nlohmann::json js;
    js["id"] = s.id;
    js["gt"] = s.gt_path;
    js["pred"] = s.pred_path;
    nlohmann::json lesions = nlohmann::json::array();
    for (std::size_t i = 0; i < s.lesions.size(); ++i)
      lesions.push_back({{"volume_mm3", s.lesions[i].volume_mm3},
                         {"diameter_mm", s.lesions[i].diameter_mm},
                         {"dropped", static_cast<bool>(s.dropped[i])}});
    js["lesions"] = std::move(lesions);
    nlohmann::json fps = nlohmann::json::array();
    for (const AnalyticLesion& f : s.fp_lesions)
      fps.push_back(
          {{"volume_mm3", f.volume_mm3}, {"diameter_mm", f.diameter_mm}});
    js["false_positives"] = std::move(fps);
    js["expected"] = {{"tp", s.expected_tp},
                      {"fn", s.expected_fn},
                      {"fp", s.expected_fp}};
    studies.push_back(std::move(js));
  }
  j["studies"] = std::move(studies);
  j["totals"] = {{"n_lesions", m.total_lesions},
                 {"tp", m.total_tp},
                 {"fn", m.total_fn},
                 {"fp", m.total_fp}};

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

CohortManifest generate_cohort(const CohortParams& params,
                               const std::filesystem::path& out_dir) {
  if (params.n_positive < 0 || params.n_negative < 0 ||
      params.n_lesions < params.n_positive)
    throw GenerationError("cohort counts invalid");
  if (params.n_positive > 0 &&
      params.n_lesions > kMaxGtPerStudy * params.n_positive)
    throw GenerationError("too many lesions for the study capacity");
  const int n_studies = params.n_positive + params.n_negative;
  if (params.n_false_positive > kMaxFpPerStudy * n_studies)
    throw GenerationError("too many false positives for the study capacity");
  if (params.n_dropped > params.n_lesions)
    throw GenerationError("cannot drop more lesions than exist");

  SplitMix64 rng(params.seed);

  // Lesion counts per positive study: one each, extras spread at random.
  std::vector<int> lesions_per_study(n_studies, 0);
  for (int s = 0; s < params.n_positive; ++s) lesions_per_study[s] = 1;
  int extras = params.n_lesions - params.n_positive;
  while (extras > 0) {
    const int s = static_cast<int>(rng.next_below(params.n_positive));
    if (lesions_per_study[s] < kMaxGtPerStudy) {
      ++lesions_per_study[s];
      --extras;
    }
  }

  std::vector<int> fp_per_study(n_studies, 0);
  int fps = params.n_false_positive;
  while (fps > 0) {
    const int s = static_cast<int>(rng.next_below(n_studies));
    if (fp_per_study[s] < kMaxFpPerStudy) {
      ++fp_per_study[s];
      --fps;
    }
  }

  // Plan every shape deterministically before touching the filesystem.
  std::vector<std::vector<PlannedShape>> gt_shapes(n_studies);
  std::vector<std::vector<PlannedShape>> fp_shapes(n_studies);
  std::vector<std::pair<int, int>> lesion_index;  // (study, slot in study)
  for (int s = 0; s < n_studies; ++s) {
    for (int k = 0; k < lesions_per_study[s]; ++k) {
      PlannedShape ps;
      const double d = sample_diameter(rng, params);
      const bool ellipsoid = rng.next_below(4) == 3;
      ps.shape = make_shape(rng, params, k, d, ellipsoid);
      ps.analytic_diameter = d;
      lesion_index.emplace_back(s, k);
      gt_shapes[s].push_back(std::move(ps));
    }
    for (int k = 0; k < fp_per_study[s]; ++k) {
      PlannedShape ps;
      const double d = sample_diameter(rng, params);
      ps.shape = make_shape(rng, params, kMaxGtPerStudy + k, d, false);
      ps.analytic_diameter = d;
      fp_shapes[s].push_back(std::move(ps));
    }
  }

  if (params.drop_below_diameter_mm > 0.0) {
    for (auto& shapes : gt_shapes)
      for (auto& ps : shapes)
        ps.dropped = ps.analytic_diameter < params.drop_below_diameter_mm;
  } else if (params.n_dropped > 0) {
    std::vector<std::size_t> order(lesion_index.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);
    for (int i = 0; i < params.n_dropped; ++i) {
      const auto [study, slot] = lesion_index[order[i]];
      gt_shapes[study][slot].dropped = true;
    }
  }

  std::filesystem::create_directories(out_dir / "gt");
  std::filesystem::create_directories(out_dir / "pred");

  CohortManifest manifest;
  manifest.params = params;
  const char* ext = params.gzip ? ".nii.gz" : ".nii";

  for (int s = 0; s < n_studies; ++s) {
    StudyManifest sm;
    sm.id = study_name(s);
    sm.gt_path = "gt/" + sm.id + ext;
    sm.pred_path = "pred/" + sm.id + ext;

    PhantomSpec gt_spec;
    gt_spec.dims = params.study_dims;
    gt_spec.spacing = params.spacing;
    PhantomSpec pred_spec = gt_spec;
    for (const PlannedShape& ps : gt_shapes[s]) {
      gt_spec.shapes.push_back(ps.shape);
      if (!ps.dropped) pred_spec.shapes.push_back(ps.shape);
      AnalyticLesion a = analytic_of(ps.shape);
      sm.lesions.push_back(a);
      sm.dropped.push_back(ps.dropped);
      if (ps.dropped)
        ++sm.expected_fn;
      else
        ++sm.expected_tp;
    }
    for (const PlannedShape& ps : fp_shapes[s]) {
      pred_spec.shapes.push_back(ps.shape);
      sm.fp_lesions.push_back(analytic_of(ps.shape));
      ++sm.expected_fp;
    }

    auto [gt_mask, gt_analytic] = rasterize(gt_spec);
    auto [pred_mask, pred_analytic] = rasterize(pred_spec);
    save_volume(gt_mask.grid, out_dir / sm.gt_path);
    save_volume(pred_mask.grid, out_dir / sm.pred_path);

    manifest.total_lesions += static_cast<int>(sm.lesions.size());
    manifest.total_tp += sm.expected_tp;
    manifest.total_fn += sm.expected_fn;
    manifest.total_fp += sm.expected_fp;
    manifest.studies.push_back(std::move(sm));
  }

  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace voleval::phantom
