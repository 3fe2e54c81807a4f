#pragma once

#include <vector>

#include "smrkit/types.hpp"

namespace smrkit {

// Per-machine satisfaction with a compressed variant, measured against the
// same machine's perception of the original. Classification scores are
// binary top-K consistency; detection scores are mAP against a pseudo
// ground truth built from the confidence-filtered original detections.
struct SatisfactionScore {
  double value = 0;
  Task task = Task::kClassification;
  // Detection only: the pseudo ground truth was empty, so the score is a
  // vacuous 1.0 (no original perception existed to be disturbed).
  bool vacuous = false;
};

struct DetectionScoringConfig {
  std::vector<double> iou_thresholds;  // strictly increasing, in (0, 1]
  double conf_threshold = 0.3;

  static std::vector<double> default_iou_grid();  // 0.5, 0.55, ..., 0.95
  static DetectionScoringConfig defaults();
  void validate() const;
};

// A pseudo ground truth box: a filtered original detection with its
// confidence discarded.
struct GroundTruthBox {
  BBox bbox;
  int category = 0;
};

// 1 when the compressed top-1 category appears in the original's top-k set.
SatisfactionScore score_classification(const ClassificationPrediction& compressed,
                                       const ClassificationPrediction& original,
                                       int k);

// Intersection over union of two boxes, (x, y, w, h) half-open pixel
// coordinates; 0 when disjoint.
double iou(const BBox& a, const BBox& b);

// Original detections with confidence strictly above the threshold become
// the pseudo ground truth; their confidences are discarded.
std::vector<GroundTruthBox> filter_pseudo_gt(const std::vector<Detection>& original_dets,
                                             double conf_threshold);

// Mean over ground-truth categories of per-category average precision at one
// IOU threshold. Matching is greedy in descending confidence (ties by input
// order); each detection takes the highest-IOU unmatched same-category box
// at or above the threshold (ties by box index). The precision-recall curve
// is integrated with all-point interpolation. Categories absent from the
// ground truth are excluded from the mean.
double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gt,
                         double iou_threshold);

// Detection satisfaction: mean of average_precision over the configured IOU
// grid. Compressed detections are evaluated unfiltered.
SatisfactionScore score_detection(const std::vector<Detection>& compressed_dets,
                                  const std::vector<Detection>& original_dets,
                                  const DetectionScoringConfig& config);

}  // namespace smrkit
