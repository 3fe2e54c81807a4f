#include "smrkit/satisfaction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace smrkit {

std::vector<double> DetectionScoringConfig::default_iou_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back((50 + 5 * i) / 100.0);
  return grid;
}

DetectionScoringConfig DetectionScoringConfig::defaults() {
  return DetectionScoringConfig{default_iou_grid(), 0.3};
}

void DetectionScoringConfig::validate() const {
  if (iou_thresholds.empty()) {
    throw std::runtime_error("IOU threshold grid is empty");
  }
  double prev = 0;
  for (double t : iou_thresholds) {
    if (!(t > 0) || t > 1) {
      throw std::runtime_error("IOU thresholds must lie in (0, 1]");
    }
    if (t <= prev) {
      throw std::runtime_error("IOU threshold grid must be strictly increasing");
    }
    prev = t;
  }
  if (!(conf_threshold > 0) || conf_threshold > 1) {
    throw std::runtime_error("confidence threshold must lie in (0, 1]");
  }
}

SatisfactionScore score_classification(const ClassificationPrediction& compressed,
                                       const ClassificationPrediction& original,
                                       int k) {
  if (k < 1) {
    throw std::runtime_error("top-k requires k >= 1, got " + std::to_string(k));
  }
  if (static_cast<std::size_t>(k) > original.ranked_categories.size()) {
    throw std::runtime_error(
        "k exceeds available ranking depth: k = " + std::to_string(k) +
        ", ranking has " + std::to_string(original.ranked_categories.size()) +
        " categories");
  }
  const int top1 = compressed.top1();
  const auto begin = original.ranked_categories.begin();
  const bool hit = std::find(begin, begin + k, top1) != begin + k;
  return SatisfactionScore{hit ? 1.0 : 0.0, Task::kClassification, false};
}

double iou(const BBox& a, const BBox& b) {
  if (!(a.w > 0) || !(a.h > 0) || !(b.w > 0) || !(b.h > 0)) {
    throw std::runtime_error("iou requires boxes with positive width/height");
  }
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

std::vector<GroundTruthBox> filter_pseudo_gt(const std::vector<Detection>& original_dets,
                                             double conf_threshold) {
  if (!(conf_threshold > 0) || conf_threshold > 1) {
    throw std::runtime_error("confidence threshold must lie in (0, 1]");
  }
  std::vector<GroundTruthBox> gt;
  for (const Detection& d : original_dets) {
    if (d.confidence > conf_threshold) {
      gt.push_back(GroundTruthBox{d.bbox, d.category});
    }
  }
  return gt;
}

namespace {

// TP/FP flags for one category's detections, in confidence-descending order.
std::vector<bool> greedy_match(const std::vector<const Detection*>& dets,
                               const std::vector<const GroundTruthBox*>& gt,
                               double iou_threshold) {
  std::vector<bool> taken(gt.size(), false);
  std::vector<bool> tp(dets.size(), false);
  for (std::size_t di = 0; di < dets.size(); ++di) {
    double best_iou = 0;
    std::size_t best_g = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[di]->bbox, gt[g]->bbox);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best_g = g;
      }
    }
    if (best_g < gt.size()) {
      taken[best_g] = true;
      tp[di] = true;
    }
  }
  return tp;
}

// Area under the precision envelope: all-point interpolation of the PR curve.
double ap_from_flags(const std::vector<bool>& tp, std::size_t n_gt) {
  if (n_gt == 0) return 0.0;
  std::vector<double> recall(tp.size());
  std::vector<double> precision(tp.size());
  std::size_t tps = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    tps += tp[i] ? 1 : 0;
    recall[i] = static_cast<double>(tps) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tps) / static_cast<double>(i + 1);
  }
  double ap = 0;
  double envelope = 0;
  for (std::size_t i = tp.size(); i-- > 0;) {
    envelope = std::max(envelope, precision[i]);
    const double prev_r = i == 0 ? 0.0 : recall[i - 1];
    if (recall[i] > prev_r) {
      ap += (recall[i] - prev_r) * envelope;
    }
  }
  return ap;
}

}  // namespace

double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gt,
                         double iou_threshold) {
  if (!(iou_threshold > 0) || iou_threshold > 1) {
    throw std::runtime_error("IOU threshold must lie in (0, 1]");
  }
  if (gt.empty()) return 0.0;

  // Group ground truth by category, preserving box order.
  std::map<int, std::vector<const GroundTruthBox*>> gt_by_cat;
  for (const GroundTruthBox& g : gt) gt_by_cat[g.category].push_back(&g);

  // Stable sort keeps input order on confidence ties.
  std::vector<const Detection*> ordered;
  ordered.reserve(dets.size());
  for (const Detection& d : dets) ordered.push_back(&d);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Detection* a, const Detection* b) {
                     return a->confidence > b->confidence;
                   });

  double ap_sum = 0;
  for (const auto& [cat, boxes] : gt_by_cat) {
    std::vector<const Detection*> cat_dets;
    for (const Detection* d : ordered) {
      if (d->category == cat) cat_dets.push_back(d);
    }
    const std::vector<bool> tp = greedy_match(cat_dets, boxes, iou_threshold);
    ap_sum += ap_from_flags(tp, boxes.size());
  }
  return ap_sum / static_cast<double>(gt_by_cat.size());
}

SatisfactionScore score_detection(const std::vector<Detection>& compressed_dets,
                                  const std::vector<Detection>& original_dets,
                                  const DetectionScoringConfig& config) {
  config.validate();
  const std::vector<GroundTruthBox> gt =
      filter_pseudo_gt(original_dets, config.conf_threshold);
  if (gt.empty()) {
    return SatisfactionScore{1.0, Task::kDetection, true};
  }
  double sum = 0;
  for (double thr : config.iou_thresholds) {
    sum += average_precision(compressed_dets, gt, thr);
  }
  const double map = sum / static_cast<double>(config.iou_thresholds.size());
  return SatisfactionScore{map, Task::kDetection, false};
}

}  // namespace smrkit
