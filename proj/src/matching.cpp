#include "voleval/matching.hpp"

#include <algorithm>
#include <cmath>

#include "voleval/distance.hpp"
#include "voleval/errors.hpp"

namespace voleval {

namespace {

// Overlap voxel counts between every (gt, pred) lesion pair, computed by
// painting prediction labels into a dense volume and walking gt voxels.
std::vector<std::vector<std::size_t>> overlap_matrix(const LesionSet& gt,
                                                     const LesionSet& pred) {
  const std::size_t n = static_cast<std::size_t>(gt.dims[0]) * gt.dims[1] *
                        gt.dims[2];
  std::vector<std::int32_t> pred_label(n, 0);
  const auto index = [&](const Coord& c) {
    return static_cast<std::size_t>(c.x) +
           static_cast<std::size_t>(gt.dims[0]) *
               (static_cast<std::size_t>(c.y) +
                static_cast<std::size_t>(gt.dims[1]) * c.z);
  };
  for (const Lesion& p : pred.lesions)
    for (const Coord& c : p.voxels) pred_label[index(c)] = p.id;

  std::vector<std::vector<std::size_t>> ov(
      gt.lesions.size(), std::vector<std::size_t>(pred.lesions.size(), 0));
  for (std::size_t gi = 0; gi < gt.lesions.size(); ++gi)
    for (const Coord& c : gt.lesions[gi].voxels) {
      const std::int32_t pl = pred_label[index(c)];
      if (pl > 0) ++ov[gi][static_cast<std::size_t>(pl - 1)];
    }
  return ov;
}

void require_same_grid(const LesionSet& gt, const LesionSet& pred) {
  if (gt.dims != pred.dims || gt.spacing != pred.spacing)
    throw IncompatibleGridsError(
        "ground truth and prediction are on different grids");
}

}  // namespace

MatchResult match_lesions(const LesionSet& gt, const LesionSet& pred) {
  require_same_grid(gt, pred);
  const auto ov = overlap_matrix(gt, pred);

  MatchResult result;
  std::vector<bool> pred_matched(pred.lesions.size(), false);
  for (std::size_t gi = 0; gi < gt.lesions.size(); ++gi) {
    TruePositivePair pair;
    pair.gt_id = gt.lesions[gi].id;
    for (std::size_t pi = 0; pi < pred.lesions.size(); ++pi)
      if (ov[gi][pi] > 0) {
        pair.pred_ids.push_back(pred.lesions[pi].id);
        pred_matched[pi] = true;
      }
    if (pair.pred_ids.empty())
      result.false_negatives.push_back(pair.gt_id);
    else
      result.true_positive_pairs.push_back(std::move(pair));
  }
  for (std::size_t pi = 0; pi < pred.lesions.size(); ++pi)
    if (!pred_matched[pi])
      result.false_positives.push_back(pred.lesions[pi].id);
  return result;
}

double dice_lesionwise(const Lesion& gt_lesion,
                       const std::vector<const Lesion*>& matched_preds) {
  // Prediction components are disjoint, so the union size is the sum of
  // sizes and the intersection is the sum of per-component overlaps.
  std::vector<Coord> gt_sorted = gt_lesion.voxels;
  std::sort(gt_sorted.begin(), gt_sorted.end(), [](const Coord& a, const Coord& b) {
    return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
  });
  std::size_t pred_size = 0;
  std::size_t inter = 0;
  for (const Lesion* p : matched_preds) {
    pred_size += p->voxels.size();
    for (const Coord& c : p->voxels)
      if (std::binary_search(gt_sorted.begin(), gt_sorted.end(), c,
                             [](const Coord& a, const Coord& b) {
                               return std::tie(a.z, a.y, a.x) <
                                      std::tie(b.z, b.y, b.x);
                             }))
        ++inter;
  }
  return 2.0 * static_cast<double>(inter) /
         static_cast<double>(gt_lesion.voxels.size() + pred_size);
}

double nsd_lesionwise(const Lesion& gt_lesion,
                      const std::vector<const Lesion*>& matched_preds,
                      double tau_mm, const std::array<double, 3>& spacing) {
  std::vector<Coord> pred_surface;
  for (const Lesion* p : matched_preds)
    pred_surface.insert(pred_surface.end(), p->surface.begin(),
                        p->surface.end());
  if (pred_surface.empty())
    throw InsufficientDataError("NSD is undefined for an empty prediction");

  const double tau_sq = tau_mm * tau_mm;
  const auto d_pred_to_gt =
      nearest_site_sqdist(gt_lesion.surface, pred_surface, spacing);
  const auto d_gt_to_pred =
      nearest_site_sqdist(pred_surface, gt_lesion.surface, spacing);
  std::size_t within = 0;
  for (double d : d_pred_to_gt) within += (d <= tau_sq);
  for (double d : d_gt_to_pred) within += (d <= tau_sq);
  return static_cast<double>(within) /
         static_cast<double>(pred_surface.size() + gt_lesion.surface.size());
}

StudyEvaluation study_metrics(const LesionSet& gt, const LesionSet& pred,
                              double tau_mm) {
  require_same_grid(gt, pred);
  StudyEvaluation eval;
  eval.match = match_lesions(gt, pred);
  eval.n_pred_lesions = pred.lesions.size();

  std::vector<const Lesion*> pred_by_id(pred.lesions.size() + 1, nullptr);
  for (const Lesion& p : pred.lesions) pred_by_id[p.id] = &p;

  std::vector<const TruePositivePair*> tp_by_gt(gt.lesions.size() + 1, nullptr);
  for (const TruePositivePair& pair : eval.match.true_positive_pairs)
    tp_by_gt[pair.gt_id] = &pair;

  for (const Lesion& g : gt.lesions) {
    GtLesionRecord rec;
    rec.gt_id = g.id;
    rec.gt_volume_mm3 = g.volume_mm3;
    rec.gt_diameter_mm = g.max_diameter_mm;
    const TruePositivePair* pair = tp_by_gt[g.id];
    rec.detected = pair != nullptr;
    if (pair) {
      rec.pred_ids = pair->pred_ids;
      std::vector<const Lesion*> matched;
      for (int pid : pair->pred_ids) matched.push_back(pred_by_id[pid]);

      LesionMetrics m;
      m.dice = dice_lesionwise(g, matched);
      m.nsd = nsd_lesionwise(g, matched, tau_mm, gt.spacing);
      m.gt_volume_mm3 = g.volume_mm3;
      m.gt_diameter_mm = g.max_diameter_mm;
      std::size_t union_size = 0;
      std::vector<Coord> union_surface;
      for (const Lesion* p : matched) {
        union_size += p->voxels.size();
        union_surface.insert(union_surface.end(), p->surface.begin(),
                             p->surface.end());
      }
      m.pred_volume_mm3 = lesion_volume(union_size, gt.spacing);
      m.pred_diameter_mm = lesion_max_diameter(union_surface, gt.spacing);
      m.volume_diff_mm3 = m.gt_volume_mm3 - m.pred_volume_mm3;
      m.diameter_diff_mm = m.gt_diameter_mm - m.pred_diameter_mm;
      rec.metrics = m;
    }
    eval.gt_lesions.push_back(std::move(rec));
  }

  for (int fp_id : eval.match.false_positives) {
    const Lesion* p = pred_by_id[fp_id];
    eval.false_positives.push_back({fp_id, p->volume_mm3, p->max_diameter_mm});
  }
  return eval;
}

}  // namespace voleval
