#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "smrkit/numeric.hpp"
#include "smrkit/predictor.hpp"
#include "smrkit/rng.hpp"

using namespace smrkit;

namespace {

// Fixed samples handed straight to the trainer.
class VectorSource : public SampleSource {
 public:
  explicit VectorSource(std::vector<TrainSample> samples)
      : samples_(std::move(samples)) {}
  std::size_t epoch_size() const override { return samples_.size(); }
  void epoch_samples(int, std::vector<TrainSample>& out) override {
    out = samples_;
  }

 private:
  std::vector<TrainSample> samples_;
};

std::vector<TrainSample> random_batch(int input_dim, int count,
                                      std::uint64_t seed) {
  RandomStream stream(seed, "batch-gen");
  std::vector<TrainSample> batch;
  for (int i = 0; i < count; ++i) {
    TrainSample s;
    for (int k = 0; k < input_dim; ++k) {
      s.input.push_back(stream.uniform_real(-1.0, 1.0));
    }
    s.target = stream.uniform_real();
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace

TEST_CASE("feature difference is cosine similarity") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{1.0, 1.0};
  CHECK(feature_difference(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(feature_difference(a, std::vector<double>{0.0, 3.0}) == doctest::Approx(0.0));
  CHECK(feature_difference(a, b) ==
        doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK_THROWS(feature_difference(a, std::vector<double>{1.0, 2.0, 3.0}));
  CHECK_THROWS(feature_difference(a, std::vector<double>{0.0, 0.0}));
}

TEST_CASE("feature difference symmetry and scale invariance") {
  RandomStream stream(5, "cosine-prop");
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> a(6);
    std::vector<double> b(6);
    for (int k = 0; k < 6; ++k) {
      a[k] = stream.uniform_real(-2.0, 2.0) + 0.01;
      b[k] = stream.uniform_real(-2.0, 2.0) + 0.01;
    }
    const double ab = feature_difference(a, b);
    CHECK(ab == doctest::Approx(feature_difference(b, a)).epsilon(1e-14));
    CHECK(feature_difference(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    const double lambda = 0.25 + 3.0 * stream.uniform_real();
    std::vector<double> scaled = a;
    for (double& v : scaled) v *= lambda;
    CHECK(feature_difference(scaled, b) == doctest::Approx(ab).epsilon(1e-12));
    CHECK(ab >= -1.0 - 1e-12);
    CHECK(ab <= 1.0 + 1e-12);
  }
}

TEST_CASE("cubic fit recovers planted coefficients") {
  RandomStream stream(8, "fit");
  for (int trial = 0; trial < 50; ++trial) {
    const std::array<double, 4> truth = {
        stream.uniform_real(-1, 1), stream.uniform_real(-1, 1),
        stream.uniform_real(-1, 1), stream.uniform_real(-1, 1)};
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 12; ++i) {
      const double xv = -1.0 + 2.0 * i / 11.0;
      x.push_back(xv);
      y.push_back(polyval(truth, xv));
    }
    const std::array<double, 4> fit = cubic_fit(x, y);
    double rms = 0;
    for (int k = 0; k < 4; ++k) {
      rms += (fit[k] - truth[k]) * (fit[k] - truth[k]);
    }
    CHECK(std::sqrt(rms / 4.0) < 1e-9);
  }
  CHECK_THROWS(cubic_fit(std::vector<double>{1, 1, 1, 1},
                         std::vector<double>{1, 2, 3, 4}));
}

TEST_CASE("forward pass hand arithmetic") {
  // Single affine layer [1 -> 1]: w = 2, b = 0.5.
  const MlpRegressor linear =
      MlpRegressor::from_parameters({1, 1}, {2.0, 0.5});
  CHECK(linear.forward_raw(std::vector<double>{0.1}) == doctest::Approx(0.7));
  CHECK(linear.forward(std::vector<double>{1.0}) == 1.0);   // clamped from 2.5
  CHECK(linear.forward(std::vector<double>{-1.0}) == 0.0);  // clamped from -1.5

  // [2 -> 2 -> 1] with a rectifier between: params [W1 (2x2), b1, W2, b2].
  const MlpRegressor net = MlpRegressor::from_parameters(
      {2, 2, 1}, {1.0, -1.0, 0.5, 0.5, /*b1*/ 0.0, 0.25, /*W2*/ 1.0, 2.0,
                  /*b2*/ -0.1});
  // x = (1, 2): z1 = (1*1 + -1*2, .5*1 + .5*2) + (0, .25) = (-1, 1.75)
  // a1 = (0, 1.75); out = 1*0 + 2*1.75 - 0.1 = 3.4
  CHECK(net.forward_raw(std::vector<double>{1.0, 2.0}) ==
        doctest::Approx(3.4).epsilon(1e-15));

  // Zero weights and biases predict exactly 0.
  const MlpRegressor zero = MlpRegressor::from_parameters(
      {2, 2, 1}, std::vector<double>(9, 0.0));
  CHECK(zero.forward(std::vector<double>{0.3, -0.7}) == 0.0);

  CHECK_THROWS(net.forward(std::vector<double>{1.0}));
  CHECK_THROWS(MlpRegressor::from_parameters({2, 2, 1}, {1.0}));
}

TEST_CASE("forward pass is deterministic and init is seed-stable") {
  const MlpRegressor a(MlpRegressor::default_layer_sizes(8), 42);
  const MlpRegressor b(MlpRegressor::default_layer_sizes(8), 42);
  const MlpRegressor c(MlpRegressor::default_layer_sizes(8), 43);
  REQUIRE(a.param_count() == b.param_count());
  bool all_equal = true;
  bool any_differs_from_c = false;
  for (std::size_t i = 0; i < a.param_count(); ++i) {
    all_equal = all_equal && a.param(i) == b.param(i);
    any_differs_from_c = any_differs_from_c || a.param(i) != c.param(i);
  }
  CHECK(all_equal);
  CHECK(any_differs_from_c);

  std::vector<double> x(8, 0.25);
  CHECK(a.forward(x) == a.forward(x));
}

TEST_CASE("backprop matches central finite differences on a 4-8-1 net") {
  const MlpRegressor model({4, 8, 1}, 2024);
  const auto batch = random_batch(4, 8, 7);
  CHECK(gradient_check(model, batch, MlpRegressor::Loss::kL1) < 1e-4);
}

TEST_CASE("linear model under squared loss checks to near machine precision") {
  const MlpRegressor model = MlpRegressor::from_parameters(
      {3, 1}, {0.4, -0.2, 0.9, 0.05});
  const auto batch = random_batch(3, 6, 11);
  CHECK(gradient_check(model, batch, MlpRegressor::Loss::kSquared) < 1e-7);
}

TEST_CASE("dead rectifier units do not blow up the relative error guard") {
  // First hidden unit is forced dead: large negative bias.
  MlpRegressor model({2, 2, 1}, 3);
  model.set_param(model.param_count() - 3, 0.0);  // W2 weight from dead unit
  // Drive the first unit's bias strongly negative.
  model.set_param(4, -100.0);
  const auto batch = random_batch(2, 4, 13);
  const double err = gradient_check(model, batch, MlpRegressor::Loss::kL1);
  CHECK(std::isfinite(err));
  CHECK(err < 1e-4);
}

TEST_CASE("training fits a constant target via the bias path") {
  RandomStream stream(6, "const-data");
  std::vector<TrainSample> samples;
  for (int i = 0; i < 64; ++i) {
    TrainSample s;
    s.input = {stream.uniform_real(-1, 1), stream.uniform_real(-1, 1)};
    s.target = 0.37;
    samples.push_back(std::move(s));
  }
  VectorSource source(std::move(samples));
  MlpRegressor model({2, 8, 1}, 99);
  TrainingConfig config;
  config.learning_rate = 0.003;
  config.epochs = 200;
  config.batch_size = 16;
  config.seed = 5;
  const TrainResult result = train(model, source, config);
  REQUIRE(result.epoch_loss.size() == 200);
  CHECK(result.epoch_loss.back() < 1e-3);
}

TEST_CASE("training reduces loss on a learnable cosine toy") {
  const auto data = fixtures::make_cosine_regression(
      {.samples = 400, .feature_dim = 6, .noise_sigma = 0.0, .seed = 21});
  std::vector<TrainSample> samples;
  for (std::size_t i = 0; i < data.target.size(); ++i) {
    TrainSample s;
    s.input = FeaturePair{data.reference[i], data.variant[i]}.concatenated();
    s.target = data.target[i];
    samples.push_back(std::move(s));
  }
  VectorSource source(std::move(samples));
  MlpRegressor model(MlpRegressor::default_layer_sizes(12), 77);
  TrainingConfig config;
  config.learning_rate = 3e-3;
  config.epochs = 120;
  config.batch_size = 32;
  config.seed = 7;
  const TrainResult result = train(model, source, config);
  CHECK(result.epoch_loss.back() < 0.5 * result.epoch_loss.front());
}

TEST_CASE("training aborts on divergence with a diagnostic") {
  VectorSource source(random_batch(2, 16, 3));
  MlpRegressor model({2, 4, 1}, 1);
  TrainingConfig config;
  config.learning_rate = 1e160;
  config.epochs = 5;
  config.batch_size = 4;
  CHECK_THROWS_WITH_AS(train(model, source, config),
                       doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("predict_smr contracts for both model kinds") {
  // Zero-initialized difference model outputs 0, so the estimate is 1.0.
  const MlpRegressor zero = MlpRegressor::from_parameters(
      {4, 2, 1}, std::vector<double>(13, 0.0));
  const std::vector<double> ref{0.5, 0.5};
  const std::vector<double> var{0.25, 0.75};
  CHECK(predict_smr(zero, ModelKind::kDifference, ref, var) == 1.0);

  // Baseline passes its (clamped) output through.
  const MlpRegressor passthrough = MlpRegressor::from_parameters(
      {4, 1}, {0.0, 0.0, 0.0, 0.0, 0.73});
  CHECK(predict_smr(passthrough, ModelKind::kBaseline, ref, var) ==
        doctest::Approx(0.73));

  CHECK_THROWS(predict_smr(zero, ModelKind::kBaseline, ref, std::vector<double>{1.0}));

  // Any output maps into [0, 1] for either kind.
  RandomStream stream(31, "clamp-prop");
  const MlpRegressor random_model({4, 6, 1}, 12345);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> r{stream.uniform_real(-3, 3), stream.uniform_real(-3, 3)};
    std::vector<double> v{stream.uniform_real(-3, 3), stream.uniform_real(-3, 3)};
    for (ModelKind kind : {ModelKind::kBaseline, ModelKind::kDifference}) {
      const double p = predict_smr(random_model, kind, r, v);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("checkpoints round-trip exactly") {
  const MlpRegressor model(MlpRegressor::default_layer_sizes(6), 8);
  const auto path =
      std::filesystem::temp_directory_path() / "smrkit_model_test.json";
  model.save(path, ModelKind::kDifference, 987);
  const LoadedModel loaded = load_model(path);
  CHECK(loaded.kind == ModelKind::kDifference);
  CHECK(loaded.seed == 987);
  REQUIRE(loaded.model.param_count() == model.param_count());
  for (std::size_t i = 0; i < model.param_count(); ++i) {
    CHECK(loaded.model.param(i) == model.param(i));
  }
  CHECK(loaded.model.layer_sizes() == model.layer_sizes());
  std::filesystem::remove(path);
}

TEST_CASE("correlation study: constant SMR and monotone libraries") {
  // Build feature records for two extractors over 5 levels.
  FeatureSet features;
  const QpLadder ladder({32, 36, 40, 44, 48});
  auto add_feature = [&](const std::string& ex, QualityLevel level, double cosine) {
    FeatureRecord rec;
    rec.extractor = ex;
    rec.image = "img";
    rec.level = level;
    // Planted cosine against the reference direction (1, 0).
    rec.vec = {cosine, std::sqrt(std::max(0.0, 1.0 - cosine * cosine))};
    features.add(rec);
  };
  const double cosines[] = {0.95, 0.9, 0.8, 0.6, 0.3};
  for (const std::string ex : {"e1", "e2"}) {
    add_feature(ex, QualityLevel::original(), 1.0);
    for (int i = 0; i < 5; ++i) {
      add_feature(ex, ladder.coded()[i], cosines[i]);
    }
  }

  SUBCASE("constant SMR flags spearman undefined, fits the constant") {
    SmrTable table{"img", "top1", {}, false};
    table.entries[QualityLevel::original()] = SmrEntry{1.0, 2};
    for (int i = 0; i < 5; ++i) {
      table.entries[ladder.coded()[i]] = SmrEntry{1.0, 2};
    }
    const auto results = correlation_study(features, {}, {table});
    REQUIRE(results.size() == 1);
    CHECK_FALSE(results[0].spearman_defined);
    CHECK(results[0].fit_defined);
    CHECK(results[0].cubic[0] == doctest::Approx(1.0));
    CHECK(results[0].cubic[3] == doctest::Approx(0.0));
  }

  SUBCASE("monotone SMR tracks D with spearman +1") {
    SmrTable table{"img", "top1", {}, false};
    table.entries[QualityLevel::original()] = SmrEntry{1.0, 2};
    const double smrs[] = {0.9, 0.8, 0.7, 0.5, 0.2};
    for (int i = 0; i < 5; ++i) {
      table.entries[ladder.coded()[i]] = SmrEntry{smrs[i], 2};
    }
    const auto results = correlation_study(features, {"e1", "e2"}, {table});
    REQUIRE(results.size() == 1);
    CHECK(results[0].spearman_defined);
    CHECK(results[0].spearman == doctest::Approx(1.0));
    CHECK(results[0].pearson > 0.9);
    REQUIRE(results[0].points.size() == 6);
    // Mean D over the two identical extractors equals the planted cosine.
    CHECK(results[0].points[1].mean_difference ==
          doctest::Approx(0.95).epsilon(1e-12));
    const std::string csv = correlation_to_csv(results);
    CHECK(csv.find("image,qp,mean_difference,smr") == 0);
  }
}

TEST_CASE("correlation fit recovers a planted cubic through feature series") {
  // Generate (D, smr) pairs exactly on a cubic and check recovery at 1e-9.
  const std::array<double, 4> truth = {0.1, 0.5, -0.3, 0.2};
  FeatureSet features;
  SmrTable table{"img", "top1", {}, false};
  QpLadder ladder({32, 34, 36, 38, 40, 42, 44, 46});
  auto plant = [&](QualityLevel level, double cosine) {
    FeatureRecord rec;
    rec.extractor = "e";
    rec.image = "img";
    rec.level = level;
    rec.vec = {cosine, std::sqrt(std::max(0.0, 1.0 - cosine * cosine))};
    features.add(rec);
    table.entries[level] = SmrEntry{polyval(truth, cosine), 1};
  };
  plant(QualityLevel::original(), 1.0);
  for (int i = 0; i < 8; ++i) {
    plant(ladder.coded()[i], 0.9 - 0.1 * i);
  }
  const auto results = correlation_study(features, {"e"}, {table});
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].fit_defined);
  double rms = 0;
  for (int k = 0; k < 4; ++k) {
    rms += (results[0].cubic[k] - truth[k]) * (results[0].cubic[k] - truth[k]);
  }
  CHECK(std::sqrt(rms / 4.0) < 1e-9);
}

TEST_CASE("difference pair source redraws pairs per epoch") {
  const auto fx = fixtures::make_classification_fixture({.machines = 4,
                                                         .images = 3,
                                                         .qp_lo = 32,
                                                         .qp_hi = 36,
                                                         .seed = 3,
                                                         .with_bitrates = false});
  const auto tables = annotate(fx.manifest, fx.records, SmrType::top_k(1));
  const auto series = collect_series(fx.features, "enc", tables);
  DifferencePairSource source(series, 42);
  std::vector<TrainSample> epoch0;
  std::vector<TrainSample> epoch0_again;
  std::vector<TrainSample> epoch1;
  source.epoch_samples(0, epoch0);
  source.epoch_samples(0, epoch0_again);
  source.epoch_samples(1, epoch1);
  REQUIRE(epoch0.size() == source.epoch_size());
  REQUIRE(epoch0_again.size() == epoch0.size());
  bool same = true;
  for (std::size_t i = 0; i < epoch0.size(); ++i) {
    same = same && epoch0[i].input == epoch0_again[i].input &&
           epoch0[i].target == epoch0_again[i].target;
  }
  CHECK(same);  // same epoch index -> same draws
  bool differs = epoch1.size() != epoch0.size();
  for (std::size_t i = 0; !differs && i < epoch0.size(); ++i) {
    differs = epoch0[i].input != epoch1[i].input;
  }
  CHECK(differs);  // new epoch -> new pairs
  // Targets are |SMR(qi) - SMR(qj)| so they lie in [0, 1].
  for (const TrainSample& s : epoch0) {
    CHECK(s.target >= 0.0);
    CHECK(s.target <= 1.0);
  }
}
