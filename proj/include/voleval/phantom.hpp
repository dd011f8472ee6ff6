#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voleval/voxel_grid.hpp"

namespace voleval::phantom {

// Axis-aligned sphere or ellipsoid with analytically known volume
// (4/3·π·abc) and diameter (2·max radius).
struct ShapeSpec {
  enum class Kind { Sphere, Ellipsoid };
  Kind kind = Kind::Sphere;
  std::array<double, 3> center_mm{0, 0, 0};
  std::array<double, 3> radii_mm{1, 1, 1};
};

// Derives a "prediction" mask from ground truth: voxel shift (mm,
// rounded to whole voxels), 6-neighborhood erosion (negative steps) or
// dilation (positive steps), and optional dropping of one component
// chosen by seed. Never creates voxels outside the grid.
struct Perturbation {
  int morph_steps = 0;
  std::array<double, 3> offset_mm{0, 0, 0};
  bool drop_one = false;
};

struct PhantomSpec {
  std::array<int, 3> dims{64, 64, 64};
  std::array<double, 3> spacing{0.5, 0.5, 0.5};
  std::array<double, 3> origin{0, 0, 0};
  std::vector<ShapeSpec> shapes;
  Perturbation perturbation;
  std::uint64_t seed = 0;
};

struct AnalyticLesion {
  double volume_mm3 = 0.0;
  double diameter_mm = 0.0;
};

// Center-inside rasterization: a voxel is set iff its center lies in the
// closed analytic shape. Shapes must stay one voxel clear of the grid
// boundary and must not touch each other after rasterization (each must
// also cover at least one voxel center); violations raise
// GenerationError.
std::pair<BinaryMask, std::vector<AnalyticLesion>> rasterize(
    const PhantomSpec& spec);

BinaryMask perturb(const BinaryMask& gt, const PhantomSpec& spec);

// 6-neighborhood morphology; the grid boundary behaves as background,
// so erosion eats inward from the volume faces and dilation clips.
BinaryMask dilate6(const BinaryMask& mask, int steps);
BinaryMask erode6(const BinaryMask& mask, int steps);

// Deterministic synthetic cohort mirroring a detection test set: paired
// gt/pred NIfTI files plus a JSON manifest of analytic truths and
// expected TP/FN/FP counts.
struct CohortParams {
  int n_positive = 101;
  int n_negative = 41;
  int n_lesions = 124;       // total across positive studies (>= n_positive)
  int n_dropped = 0;         // lesions omitted from predictions (-> FN)
  int n_false_positive = 0;  // extra prediction-only components (-> FP)
  double diameter_min_mm = 1.4;
  double diameter_max_mm = 8.0;
  // When > 0, every lesion below this analytic diameter is dropped from
  // the prediction (and n_dropped is ignored).
  double drop_below_diameter_mm = 0.0;
  // Optional exclusion interval for sampled diameters, e.g. around a
  // stratum boundary.
  double gap_lo_mm = 0.0;
  double gap_hi_mm = 0.0;
  std::array<int, 3> study_dims{64, 64, 64};
  std::array<double, 3> spacing{0.5, 0.5, 0.5};
  bool gzip = true;
  std::uint64_t seed = 0;
};

struct StudyManifest {
  std::string id;
  std::string gt_path;    // relative to the cohort directory
  std::string pred_path;  // empty when the prediction file is omitted
  std::vector<AnalyticLesion> lesions;
  std::vector<bool> dropped;  // parallel to lesions
  std::vector<AnalyticLesion> fp_lesions;
  int expected_tp = 0;
  int expected_fn = 0;
  int expected_fp = 0;
};

struct CohortManifest {
  CohortParams params;
  std::vector<StudyManifest> studies;
  int total_lesions = 0;
  int total_tp = 0;
  int total_fn = 0;
  int total_fp = 0;
};

// Writes gt/, pred/ and manifest.json under out_dir. Regenerating with
// identical params yields byte-identical files.
CohortManifest generate_cohort(const CohortParams& params,
                               const std::filesystem::path& out_dir);

}  // namespace voleval::phantom
