#pragma once

#include <map>
#include <string>
#include <vector>

#include "smrkit/records.hpp"
#include "smrkit/smr.hpp"
#include "smrkit/types.hpp"

namespace smrkit {

// Ordered SMR thresholds driving the rate-SMR sweep.
struct ThresholdSet {
  std::vector<double> values;  // strictly increasing, in (0, 1]

  void validate() const;
  // Accepts "0.6,0.65,0.7", "0.6:0.05:0.95" (lo:step:hi), and
  // "0.6:0.95:0.05" (lo:hi:step); the middle/last step position is
  // disambiguated by magnitude.
  static ThresholdSet parse(const std::string& text);
};

struct QpDecision {
  std::string image;
  double threshold = 0;
  QualityLevel base;    // q_b from the distribution
  QualityLevel chosen;  // >= base in degradation order
  bool fallback = false;  // no level met the threshold; chosen == base
};

struct RateSmrPoint {
  double threshold = 0;
  double mean_bpp = 0;
  double mean_smr = 0;  // actual SMR, never the predicted one
};

struct RateSmrCurve {
  std::string label;
  std::vector<RateSmrPoint> points;
};

// The most-degraded coded level whose mean SMR meets the threshold; when
// none qualifies, the level minimizing |mean - threshold| (ties resolved
// toward the more degraded level). ORIGINAL entries in the distribution are
// ignored.
QualityLevel select_base_qp(const SmrDistribution& distribution,
                            double threshold);

// Reverse scan from the most-degraded ladder level back toward q_b: the
// first level whose predicted SMR meets the threshold wins. If none does,
// q_b is used and the fallback flag set. Predictions must cover every
// ladder level from q_b onward.
QpDecision select_qp(const std::string& image, double threshold,
                     QualityLevel q_b, const QpLadder& ladder,
                     const std::map<QualityLevel, double>& predictions);

// Per-image predicted SMR across levels.
using PredictionMap = std::map<std::string, std::map<QualityLevel, double>>;

// Ground-truth tables reinterpreted as predictions (the GT-guided arm).
PredictionMap predictions_from_tables(const std::vector<SmrTable>& tables);

// Full decision sweep: per threshold, q_b from the distribution, then a
// per-image reverse scan over the predictions.
std::vector<QpDecision> decide_guided(const std::vector<std::string>& images,
                                      const ThresholdSet& thresholds,
                                      const SmrDistribution& distribution,
                                      const QpLadder& ladder,
                                      const PredictionMap& predictions);

// Constant-QP baseline: every image is coded at q_b for each threshold.
std::vector<QpDecision> decide_constant(const std::vector<std::string>& images,
                                        const ThresholdSet& thresholds,
                                        const SmrDistribution& distribution,
                                        const QpLadder& ladder);

// Per threshold: mean bpp over the decided images and mean ACTUAL SMR from
// the ground-truth tables.
RateSmrCurve build_curve(const std::vector<QpDecision>& decisions,
                         const BitrateSet& bitrates,
                         const std::vector<SmrTable>& gt_tables,
                         const ThresholdSet& thresholds, std::string label);

enum class BdRateMethod {
  kCubic,           // least-squares cubic on (SMR, log10 bpp)
  kPiecewiseCubic,  // monotone piecewise-cubic interpolation, for sensitivity
};

struct BdRateResult {
  double percent = 0;
  double overlap_lo = 0;
  double overlap_hi = 0;
};

// Bjontegaard delta rate of `test` against `anchor` with SMR as the quality
// axis: the mean log10 bitrate difference over the overlapping SMR interval,
// converted to percent. Negative means the test curve spends fewer bits for
// the same SMR.
BdRateResult bd_rate(const RateSmrCurve& anchor, const RateSmrCurve& test,
                     BdRateMethod method = BdRateMethod::kCubic);

// --- Interchange -------------------------------------------------------------

std::string decisions_to_csv(const std::vector<QpDecision>& decisions);
std::string curve_to_csv(const RateSmrCurve& curve);
RateSmrCurve curve_from_csv(const std::string& text);
std::string bd_rate_report_to_json(const std::string& anchor_label,
                                   const std::string& test_label,
                                   const BdRateResult& result);

}  // namespace smrkit
