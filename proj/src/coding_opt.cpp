#include "smrkit/coding_opt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smrkit/io.hpp"
#include "smrkit/numeric.hpp"

namespace smrkit {

void ThresholdSet::validate() const {
  if (values.empty()) {
    throw std::runtime_error("threshold set is empty");
  }
  double prev = 0;
  for (double t : values) {
    if (!(t > 0) || t > 1) {
      throw std::runtime_error("SMR thresholds must lie in (0, 1]");
    }
    if (t <= prev) {
      throw std::runtime_error("SMR thresholds must be strictly increasing");
    }
    prev = t;
  }
}

ThresholdSet ThresholdSet::parse(const std::string& text) {
  ThresholdSet set;
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<double> parts;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
      if (parts.size() != 3) {
        throw std::runtime_error("range form needs three fields");
      }
      const double lo = parts[0];
      // Middle field is the step when it is the smaller of the trailing two.
      const double step = parts[1] <= parts[2] ? parts[1] : parts[2];
      const double hi = parts[1] <= parts[2] ? parts[2] : parts[1];
      if (!(step > 0)) throw std::runtime_error("step must be > 0");
      for (double v = lo; v <= hi + 1e-9; v += step) {
        set.values.push_back(round_num(v));
      }
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        set.values.push_back(std::stod(item));
      }
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot parse threshold set '" + text + "': " +
                             e.what());
  }
  set.validate();
  return set;
}

QualityLevel select_base_qp(const SmrDistribution& distribution,
                            double threshold) {
  std::vector<std::pair<QualityLevel, double>> coded;
  for (const auto& [level, mean] : distribution.mean_smr) {
    if (!level.is_original()) coded.emplace_back(level, mean);
  }
  if (coded.empty()) {
    throw std::runtime_error("distribution has no coded levels");
  }
  // coded is in degradation order (map key order); scan most-degraded first.
  for (std::size_t i = coded.size(); i-- > 0;) {
    if (coded[i].second >= threshold) return coded[i].first;
  }
  // Fallback: closest mean, ties toward the more degraded level.
  QualityLevel best = coded.back().first;
  double best_gap = std::abs(coded.back().second - threshold);
  for (std::size_t i = coded.size() - 1; i-- > 0;) {
    const double gap = std::abs(coded[i].second - threshold);
    if (gap < best_gap) {
      best_gap = gap;
      best = coded[i].first;
    }
  }
  return best;
}

QpDecision select_qp(const std::string& image, double threshold,
                     QualityLevel q_b, const QpLadder& ladder,
                     const std::map<QualityLevel, double>& predictions) {
  const auto base_index = ladder.index_of(q_b);
  if (!base_index.has_value()) {
    throw std::runtime_error("base qp " + std::to_string(q_b.qp()) +
                             " is not on the ladder");
  }
  const std::vector<QualityLevel>& coded = ladder.coded();
  for (std::size_t i = *base_index; i < coded.size(); ++i) {
    if (predictions.find(coded[i]) == predictions.end()) {
      throw std::runtime_error("missing prediction for (" + image + ", qp " +
                               std::to_string(coded[i].qp()) + ")");
    }
  }
  QpDecision decision;
  decision.image = image;
  decision.threshold = threshold;
  decision.base = q_b;
  for (std::size_t i = coded.size(); i-- > *base_index;) {
    if (predictions.at(coded[i]) >= threshold) {
      decision.chosen = coded[i];
      return decision;
    }
  }
  decision.chosen = q_b;
  decision.fallback = true;
  return decision;
}

PredictionMap predictions_from_tables(const std::vector<SmrTable>& tables) {
  PredictionMap map;
  for (const SmrTable& t : tables) {
    auto& entry = map[t.image];
    for (const auto& [level, e] : t.entries) entry[level] = e.smr;
  }
  return map;
}

std::vector<QpDecision> decide_guided(const std::vector<std::string>& images,
                                      const ThresholdSet& thresholds,
                                      const SmrDistribution& distribution,
                                      const QpLadder& ladder,
                                      const PredictionMap& predictions) {
  thresholds.validate();
  std::vector<QpDecision> decisions;
  decisions.reserve(images.size() * thresholds.values.size());
  for (double threshold : thresholds.values) {
    const QualityLevel q_b = select_base_qp(distribution, threshold);
    for (const std::string& image : images) {
      auto it = predictions.find(image);
      if (it == predictions.end()) {
        throw std::runtime_error("no predictions for image " + image);
      }
      decisions.push_back(select_qp(image, threshold, q_b, ladder, it->second));
    }
  }
  return decisions;
}

std::vector<QpDecision> decide_constant(const std::vector<std::string>& images,
                                        const ThresholdSet& thresholds,
                                        const SmrDistribution& distribution,
                                        const QpLadder& ladder) {
  thresholds.validate();
  std::vector<QpDecision> decisions;
  decisions.reserve(images.size() * thresholds.values.size());
  for (double threshold : thresholds.values) {
    const QualityLevel q_b = select_base_qp(distribution, threshold);
    if (!ladder.contains(q_b)) {
      throw std::runtime_error("base qp " + std::to_string(q_b.qp()) +
                               " is not on the ladder");
    }
    for (const std::string& image : images) {
      decisions.push_back(QpDecision{image, threshold, q_b, q_b, false});
    }
  }
  return decisions;
}

RateSmrCurve build_curve(const std::vector<QpDecision>& decisions,
                         const BitrateSet& bitrates,
                         const std::vector<SmrTable>& gt_tables,
                         const ThresholdSet& thresholds, std::string label) {
  thresholds.validate();
  std::map<std::string, const SmrTable*> tables;
  for (const SmrTable& t : gt_tables) tables[t.image] = &t;

  RateSmrCurve curve;
  curve.label = std::move(label);
  for (double threshold : thresholds.values) {
    double bpp_sum = 0;
    double smr_sum = 0;
    std::size_t count = 0;
    for (const QpDecision& d : decisions) {
      if (d.threshold != threshold) continue;
      auto it = tables.find(d.image);
      if (it == tables.end()) {
        throw std::runtime_error("no ground-truth SMR table for image " +
                                 d.image);
      }
      bpp_sum += bitrates.bpp_at(d.image, d.chosen);
      smr_sum += it->second->at(d.chosen).smr;
      ++count;
    }
    if (count == 0) {
      throw std::runtime_error("no decisions for threshold " +
                               format_num(threshold));
    }
    curve.points.push_back(RateSmrPoint{threshold,
                                        bpp_sum / static_cast<double>(count),
                                        smr_sum / static_cast<double>(count)});
  }
  return curve;
}

namespace {

struct FitInput {
  std::vector<double> smr;       // ascending, distinct
  std::vector<double> log_rate;  // log10 bpp
};

FitInput prepare(const RateSmrCurve& curve) {
  if (curve.points.size() < 4) {
    throw std::runtime_error("BD-rate needs >= 4 points per curve, '" +
                             curve.label + "' has " +
                             std::to_string(curve.points.size()));
  }
  std::vector<std::pair<double, double>> pts;
  for (const RateSmrPoint& p : curve.points) {
    if (!(p.mean_bpp > 0)) {
      throw std::runtime_error("curve '" + curve.label +
                               "' has a non-positive bitrate");
    }
    pts.emplace_back(p.mean_smr, std::log10(p.mean_bpp));
  }
  std::sort(pts.begin(), pts.end());
  FitInput in;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i;
    double sum = 0;
    while (j < pts.size() && pts[j].first == pts[i].first) {
      sum += pts[j].second;
      ++j;
    }
    // Exact-duplicate SMR values merge by averaging log rate.
    in.smr.push_back(pts[i].first);
    in.log_rate.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  if (in.smr.size() < 4) {
    throw std::runtime_error("curve '" + curve.label +
                             "' has fewer than 4 distinct SMR values");
  }
  return in;
}

// Fritsch-Carlson monotone cubic Hermite slopes.
std::vector<double> pchip_slopes(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> h(n - 1);
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  std::vector<double> m(n, 0.0);
  m[0] = delta[0];
  m[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0) {
      m[i] = 0;
    } else {
      const double w1 = 2 * h[i] + h[i - 1];
      const double w2 = h[i] + 2 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0) {
      m[i] = 0;
      m[i + 1] = 0;
    }
  }
  return m;
}

// Integral of the piecewise cubic Hermite interpolant over [lo, hi].
double pchip_integral(const FitInput& in, double lo, double hi) {
  const std::vector<double>& x = in.smr;
  const std::vector<double>& y = in.log_rate;
  const std::vector<double> m = pchip_slopes(x, y);
  double total = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = std::max(lo, x[i]);
    const double b = std::min(hi, x[i + 1]);
    if (b <= a) continue;
    const double h = x[i + 1] - x[i];
    // Hermite basis antiderivatives on normalized t in [ta, tb].
    const double ta = (a - x[i]) / h;
    const double tb = (b - x[i]) / h;
    auto h00 = [](double t) { return t - t * t * t + t * t * t * t / 2.0; };
    auto h10 = [](double t) {
      return t * t / 2.0 - 2.0 * t * t * t / 3.0 + t * t * t * t / 4.0;
    };
    auto h01 = [](double t) { return t * t * t - t * t * t * t / 2.0; };
    auto h11 = [](double t) {
      return -t * t * t / 3.0 + t * t * t * t / 4.0;
    };
    total += h * (y[i] * (h00(tb) - h00(ta)) + h * m[i] * (h10(tb) - h10(ta)) +
                  y[i + 1] * (h01(tb) - h01(ta)) +
                  h * m[i + 1] * (h11(tb) - h11(ta)));
  }
  return total;
}

}  // namespace

BdRateResult bd_rate(const RateSmrCurve& anchor, const RateSmrCurve& test,
                     BdRateMethod method) {
  const FitInput a = prepare(anchor);
  const FitInput t = prepare(test);
  const double lo = std::max(a.smr.front(), t.smr.front());
  const double hi = std::min(a.smr.back(), t.smr.back());
  if (!(hi > lo)) {
    throw std::runtime_error(
        "curves have no overlapping SMR range: anchor [" +
        format_num(a.smr.front()) + ", " + format_num(a.smr.back()) +
        "], test [" + format_num(t.smr.front()) + ", " +
        format_num(t.smr.back()) + "]");
  }

  double mean_diff = 0;
  if (method == BdRateMethod::kCubic) {
    const std::array<double, 4> fit_a = cubic_fit(a.smr, a.log_rate);
    const std::array<double, 4> fit_t = cubic_fit(t.smr, t.log_rate);
    const double int_a = polyint(fit_a, hi) - polyint(fit_a, lo);
    const double int_t = polyint(fit_t, hi) - polyint(fit_t, lo);
    mean_diff = (int_t - int_a) / (hi - lo);
  } else {
    mean_diff =
        (pchip_integral(t, lo, hi) - pchip_integral(a, lo, hi)) / (hi - lo);
  }

  BdRateResult result;
  result.percent = (std::pow(10.0, mean_diff) - 1.0) * 100.0;
  result.overlap_lo = lo;
  result.overlap_hi = hi;
  return result;
}

std::string decisions_to_csv(const std::vector<QpDecision>& decisions) {
  std::string out = "image,threshold,base_qp,chosen_qp,fallback\n";
  for (const QpDecision& d : decisions) {
    out += d.image;
    out += ',';
    out += format_num(d.threshold);
    out += ',';
    out += std::to_string(d.base.qp());
    out += ',';
    out += std::to_string(d.chosen.qp());
    out += ',';
    out += d.fallback ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string curve_to_csv(const RateSmrCurve& curve) {
  std::string out = "threshold,mean_bpp,mean_smr,label\n";
  for (const RateSmrPoint& p : curve.points) {
    out += format_num(p.threshold);
    out += ',';
    out += format_num(p.mean_bpp);
    out += ',';
    out += format_num(p.mean_smr);
    out += ',';
    out += curve.label;
    out += '\n';
  }
  return out;
}

RateSmrCurve curve_from_csv(const std::string& text) {
  RateSmrCurve curve;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (line_no == 1 && !f.empty() && f[0] == "threshold") continue;
    if (f.size() != 4) {
      throw std::runtime_error("curve CSV line " + std::to_string(line_no) +
                               ": expected 4 fields");
    }
    try {
      curve.points.push_back(
          RateSmrPoint{std::stod(f[0]), std::stod(f[1]), std::stod(f[2])});
    } catch (const std::exception& e) {
      throw std::runtime_error("curve CSV line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    if (curve.label.empty()) {
      curve.label = f[3];
    } else if (curve.label != f[3]) {
      throw std::runtime_error("curve CSV mixes labels: " + curve.label +
                               " vs " + f[3]);
    }
  }
  if (curve.points.empty()) {
    throw std::runtime_error("curve CSV contains no points");
  }
  return curve;
}

std::string bd_rate_report_to_json(const std::string& anchor_label,
                                   const std::string& test_label,
                                   const BdRateResult& result) {
  return "{\"anchor\":\"" + anchor_label + "\",\"test\":\"" + test_label +
         "\",\"bd_rate_percent\":" + format_num(result.percent) +
         ",\"smr_overlap\":[" + format_num(result.overlap_lo) + "," +
         format_num(result.overlap_hi) + "]}\n";
}

}  // namespace smrkit
