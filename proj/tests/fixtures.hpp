#pragma once

// Synthetic dataset builders shared by the unit and acceptance suites.

#include <cmath>
#include <string>
#include <vector>

#include "smrkit/records.hpp"
#include "smrkit/rng.hpp"
#include "smrkit/types.hpp"

namespace smrkit::fixtures {

struct ClassificationFixtureOptions {
  int machines = 12;
  int images = 200;
  int qp_lo = 32;
  int qp_hi = 51;
  std::uint64_t seed = 20240001;
  // Feature geometry: SMR maps to the reference/variant cosine through
  // smr = clamp(cos_gain * cos + cos_bias). Spread rotates each image's
  // reference direction away from a shared axis.
  int feature_dim = 8;
  double cos_gain = 1.25;
  double cos_bias = -0.15;
  double direction_spread = 0.25;
  double feature_noise = 0.0;
  bool with_features = true;
  bool with_bitrates = true;
};

struct ClassificationFixture {
  DatasetManifest manifest;
  PerceptionSet records;
  FeatureSet features;  // extractor "enc"
  BitrateSet bitrates;
  // Empirical SMR-top1 per image per coded level (fraction of machines whose
  // compressed top-1 matched), kept for oracle recounts.
  std::vector<std::vector<double>> smr_top1;
};

// Classification dataset with per-image difficulty, a decreasing mean
// quality trend, and injected non-monotonic wiggles. Original rankings are
// [0,1,2,3,4]; a compressed top-1 lands on category 0 (top-1 hit), 2
// (top-3 hit), 4 (top-5 hit), or 99 (miss).
inline ClassificationFixture make_classification_fixture(
    const ClassificationFixtureOptions& opt = {}) {
  ClassificationFixture fx;
  fx.manifest.task = Task::kClassification;
  std::vector<int> qps;
  for (int qp = opt.qp_lo; qp <= opt.qp_hi; ++qp) qps.push_back(qp);
  fx.manifest.ladder = QpLadder(qps);
  for (int m = 0; m < opt.machines; ++m) {
    fx.manifest.machines.push_back("m" + std::to_string(m));
  }
  for (int i = 0; i < opt.images; ++i) {
    fx.manifest.images.push_back("img" + std::to_string(i));
  }

  const int n_levels = static_cast<int>(qps.size());
  RandomStream shape(opt.seed, "fixture/shape");
  RandomStream draw(opt.seed, "fixture/draw");

  const std::vector<int> original_ranking = {0, 1, 2, 3, 4};
  fx.smr_top1.assign(opt.images, std::vector<double>(n_levels, 0.0));

  for (int i = 0; i < opt.images; ++i) {
    const std::string& image = fx.manifest.images[i];
    const double base = shape.uniform_real(0.55, 0.98);
    const double slope = shape.uniform_real(0.15, 0.95);
    const double wiggle_amp = shape.uniform_real(0.0, 0.15);
    const double wiggle_freq = shape.uniform_real(1.0, 3.0);
    const double wiggle_phase = shape.uniform_real(0.0, 6.283185307179586);

    for (int m = 0; m < opt.machines; ++m) {
      PerceptionRecord original;
      original.machine = fx.manifest.machines[m];
      original.image = image;
      original.level = QualityLevel::original();
      original.payload = ClassificationPrediction{original_ranking};
      fx.records.add(std::move(original));
    }

    for (int li = 0; li < n_levels; ++li) {
      const double t = n_levels == 1
                           ? 0.0
                           : static_cast<double>(li) / (n_levels - 1);
      const double p_hit =
          std::clamp(base - slope * t +
                         wiggle_amp * std::sin(6.283185307179586 *
                                               (wiggle_freq * t + wiggle_phase)),
                     0.02, 0.995);
      int hits = 0;
      for (int m = 0; m < opt.machines; ++m) {
        int top1 = 0;
        if (draw.uniform_real() < p_hit) {
          ++hits;
        } else {
          const double u = draw.uniform_real();
          top1 = u < 0.4 ? 2 : (u < 0.7 ? 4 : 99);
        }
        std::vector<int> ranking{top1};
        for (int c : original_ranking) {
          if (c != top1 && ranking.size() < 5) ranking.push_back(c);
        }
        PerceptionRecord rec;
        rec.machine = fx.manifest.machines[m];
        rec.image = image;
        rec.level = QualityLevel::coded(qps[li]);
        rec.payload = ClassificationPrediction{std::move(ranking)};
        fx.records.add(std::move(rec));
      }
      fx.smr_top1[i][li] =
          static_cast<double>(hits) / static_cast<double>(opt.machines);
    }
  }

  if (opt.with_features) {
    RandomStream feat(opt.seed, "fixture/features");
    for (int i = 0; i < opt.images; ++i) {
      // Reference direction: shared axis plus a bounded per-image rotation.
      std::vector<double> ref(opt.feature_dim, 0.0);
      ref[0] = 1.0;
      for (int k = 0; k < opt.feature_dim; ++k) {
        ref[k] += opt.direction_spread * feat.normal();
      }
      double norm = 0;
      for (double v : ref) norm += v * v;
      norm = std::sqrt(norm);
      for (double& v : ref) v /= norm;

      // A unit direction orthogonal to ref for setting exact cosines.
      std::vector<double> perp(opt.feature_dim, 0.0);
      double dot = 0;
      for (int k = 0; k < opt.feature_dim; ++k) {
        perp[k] = feat.normal();
      }
      for (int k = 0; k < opt.feature_dim; ++k) dot += perp[k] * ref[k];
      for (int k = 0; k < opt.feature_dim; ++k) perp[k] -= dot * ref[k];
      norm = 0;
      for (double v : perp) norm += v * v;
      norm = std::sqrt(norm);
      for (double& v : perp) v /= norm;

      auto emit = [&](QualityLevel level, double smr_value) {
        const double target = std::clamp(
            (smr_value - opt.cos_bias) / opt.cos_gain, 0.02, 0.999);
        std::vector<double> vec(opt.feature_dim);
        const double ortho = std::sqrt(1.0 - target * target);
        for (int k = 0; k < opt.feature_dim; ++k) {
          vec[k] = target * ref[k] + ortho * perp[k];
          if (opt.feature_noise > 0) {
            vec[k] += opt.feature_noise * feat.normal();
          }
        }
        FeatureRecord rec;
        rec.extractor = "enc";
        rec.image = fx.manifest.images[i];
        rec.level = level;
        rec.vec = std::move(vec);
        fx.features.add(std::move(rec));
      };

      emit(QualityLevel::original(), 1.0);
      for (int li = 0; li < n_levels; ++li) {
        emit(QualityLevel::coded(qps[li]), fx.smr_top1[i][li]);
      }
    }
  }

  if (opt.with_bitrates) {
    RandomStream rate(opt.seed, "fixture/bitrates");
    for (int i = 0; i < opt.images; ++i) {
      const double scale = rate.uniform_real(0.5, 3.0);
      for (int li = 0; li < n_levels; ++li) {
        // Bounded jitter keeps per-image bpp strictly decreasing in qp:
        // level ratio 2^(-1/5) ~ 0.87 < (1-0.03)/(1+0.03).
        const double jitter = 1.0 + rate.uniform_real(-0.03, 0.03);
        BitrateRecord rec;
        rec.image = fx.manifest.images[i];
        rec.level = QualityLevel::coded(qps[li]);
        rec.bpp = scale * std::pow(2.0, -li / 5.0) * jitter;
        fx.bitrates.add(std::move(rec));
      }
    }
  }

  return fx;
}

// Samples for the predictor training-sanity check: target
// smr = clamp(cos_gain * cos + cos_bias) + gaussian noise, with the cosine
// planted between reference and variant vectors.
struct CosineRegressionData {
  std::vector<std::vector<double>> reference;
  std::vector<std::vector<double>> variant;
  std::vector<double> target;
  std::vector<double> clean_cosine;
};

struct CosineRegressionOptions {
  int samples = 2000;
  int feature_dim = 8;
  double cos_gain = 1.25;
  double cos_bias = -0.15;
  double noise_sigma = 0.02;
  double direction_spread = 0.25;
  std::uint64_t seed = 77;
};

inline CosineRegressionData make_cosine_regression(
    const CosineRegressionOptions& opt = {}) {
  CosineRegressionData data;
  RandomStream stream(opt.seed, "cosine-regression");
  for (int s = 0; s < opt.samples; ++s) {
    std::vector<double> ref(opt.feature_dim, 0.0);
    ref[0] = 1.0;
    for (int k = 0; k < opt.feature_dim; ++k) {
      ref[k] += opt.direction_spread * stream.normal();
    }
    double norm = 0;
    for (double v : ref) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : ref) v /= norm;

    std::vector<double> perp(opt.feature_dim);
    for (int k = 0; k < opt.feature_dim; ++k) perp[k] = stream.normal();
    double dot = 0;
    for (int k = 0; k < opt.feature_dim; ++k) dot += perp[k] * ref[k];
    for (int k = 0; k < opt.feature_dim; ++k) perp[k] -= dot * ref[k];
    norm = 0;
    for (double v : perp) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : perp) v /= norm;

    const double c = stream.uniform_real(0.05, 0.98);
    std::vector<double> variant(opt.feature_dim);
    const double ortho = std::sqrt(1.0 - c * c);
    for (int k = 0; k < opt.feature_dim; ++k) {
      variant[k] = c * ref[k] + ortho * perp[k];
    }
    const double clean =
        std::clamp(opt.cos_gain * c + opt.cos_bias, 0.0, 1.0);
    const double noisy =
        std::clamp(clean + opt.noise_sigma * stream.normal(), 0.0, 1.0);
    data.reference.push_back(std::move(ref));
    data.variant.push_back(std::move(variant));
    data.target.push_back(noisy);
    data.clean_cosine.push_back(c);
  }
  return data;
}

}  // namespace smrkit::fixtures
