#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voleval/lesions.hpp"

namespace voleval {

// Per-study assignment of predicted lesions to ground-truth lesions
// under the any-overlap (>0 voxels) detection criterion.
struct TruePositivePair {
  int gt_id = 0;
  std::vector<int> pred_ids;  // every prediction overlapping this gt lesion
};

struct MatchResult {
  std::vector<TruePositivePair> true_positive_pairs;
  std::vector<int> false_negatives;   // gt ids with no overlapping prediction
  std::vector<int> false_positives;   // pred ids overlapping no gt lesion
};

// Metrics for one detected gt lesion against the union of all
// predictions overlapping it. Size differences are signed, gt - pred.
struct LesionMetrics {
  double dice = 0.0;
  double nsd = 0.0;
  double gt_volume_mm3 = 0.0;
  double pred_volume_mm3 = 0.0;
  double gt_diameter_mm = 0.0;
  double pred_diameter_mm = 0.0;
  double volume_diff_mm3 = 0.0;
  double diameter_diff_mm = 0.0;
};

struct GtLesionRecord {
  int gt_id = 0;
  double gt_volume_mm3 = 0.0;
  double gt_diameter_mm = 0.0;
  bool detected = false;
  std::vector<int> pred_ids;
  std::optional<LesionMetrics> metrics;  // present iff detected
};

struct FpLesionRecord {
  int pred_id = 0;
  double volume_mm3 = 0.0;
  double diameter_mm = 0.0;
};

struct StudyEvaluation {
  std::string study_id;
  MatchResult match;
  std::vector<GtLesionRecord> gt_lesions;
  std::vector<FpLesionRecord> false_positives;
  std::size_t n_pred_lesions = 0;
};

// A gt lesion is detected iff its voxel set intersects at least one
// prediction voxel. A prediction overlapping several gt lesions is
// recorded in every such pair and never counted as a false positive.
// Throws IncompatibleGridsError when dims or spacing differ.
MatchResult match_lesions(const LesionSet& gt, const LesionSet& pred);

// 2|G∩P| / (|G|+|P|) where P is the union of matched prediction voxels.
double dice_lesionwise(const Lesion& gt_lesion,
                       const std::vector<const Lesion*>& matched_preds);

// Symmetric normalized surface distance at tolerance tau_mm: the
// fraction of surface voxels of either set lying within tau of the
// other set's surface, distances between voxel centers in mm.
double nsd_lesionwise(const Lesion& gt_lesion,
                      const std::vector<const Lesion*>& matched_preds,
                      double tau_mm, const std::array<double, 3>& spacing);

// Full per-study evaluation: matching plus LesionMetrics for every
// detected gt lesion (segmentation metrics are only defined for
// correctly detected lesions) and size records for false positives.
StudyEvaluation study_metrics(const LesionSet& gt, const LesionSet& pred,
                              double tau_mm);

}  // namespace voleval
