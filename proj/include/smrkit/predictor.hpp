#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smrkit/records.hpp"
#include "smrkit/smr.hpp"
#include "smrkit/types.hpp"

namespace smrkit {

// Cosine similarity between a variant's feature vector and its reference.
double feature_difference(std::span<const double> variant,
                          std::span<const double> reference);

// Reference/variant embedding pair feeding the regressor.
struct FeaturePair {
  std::vector<double> reference;  // from the ORIGINAL image
  std::vector<double> variant;

  // The 2d concatenated embedding: reference followed by variant.
  std::vector<double> concatenated() const;
};

enum class ModelKind { kBaseline, kDifference };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct TrainingConfig;

// Fully-connected regressor with rectifier activations between layers and a
// scalar output. Parameters live in one flat array so the optimizer,
// serialization, and the finite-difference check all share a single view.
class MlpRegressor {
 public:
  MlpRegressor() = default;
  MlpRegressor(std::vector<int> layer_sizes, std::uint64_t seed);

  // Width defaults scale with the input: [2d, 4d, 4d, 1].
  static std::vector<int> default_layer_sizes(int input_dim);

  int input_dim() const { return layer_sizes_.empty() ? 0 : layer_sizes_.front(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }

  // Raw affine output of the final layer (training objective target space).
  double forward_raw(std::span<const double> input) const;
  // Prediction contract: raw output hard-clipped to [0, 1].
  double forward(std::span<const double> input) const;

  std::size_t param_count() const { return params_.size(); }
  double param(std::size_t i) const { return params_[i]; }
  void set_param(std::size_t i, double v) { params_[i] = v; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Mean loss over the batch; grad (same length as params) receives the
  // batch-mean gradient.
  struct Sample {
    std::vector<double> input;
    double target = 0;
  };
  enum class Loss { kL1, kSquared };
  double loss_and_gradient(std::span<const Sample> batch, Loss loss,
                           std::span<double> grad) const;

  // Rebuilds a model from explicit parameters (checkpoint loading, tests).
  static MlpRegressor from_parameters(std::vector<int> layer_sizes,
                                      std::vector<double> params);

  // Versioned JSON checkpoint: layer sizes, parameters, seed, and (when
  // given) the training configuration. Parameters are stored at full
  // precision so a reload is exact.
  void save(const std::filesystem::path& path, ModelKind kind,
            std::uint64_t seed, const TrainingConfig* config = nullptr) const;

 private:
  struct LayerView {
    std::size_t w_offset = 0;
    std::size_t b_offset = 0;
    int in = 0;
    int out = 0;
  };

  void build_views();

  std::vector<int> layer_sizes_;
  std::vector<LayerView> layers_;
  std::vector<double> params_;
};

using TrainSample = MlpRegressor::Sample;

struct LoadedModel {
  MlpRegressor model;
  ModelKind kind = ModelKind::kBaseline;
  std::uint64_t seed = 0;
};

LoadedModel load_model(const std::filesystem::path& path);

// Supplies one epoch's worth of samples. The baseline task replays a fixed
// dataset; the difference task redraws its level pairs every epoch.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t epoch_size() const = 0;
  virtual void epoch_samples(int epoch, std::vector<TrainSample>& out) = 0;
};

struct TrainingConfig {
  ModelKind kind = ModelKind::kBaseline;
  double learning_rate = 1e-4;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::vector<int> hidden_sizes;  // empty = default [4d, 4d]

  void validate() const;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean L1 per epoch
};

// Seeded mini-batch Adam on mean absolute error. Throws when the loss turns
// non-finite.
TrainResult train(MlpRegressor& model, SampleSource& source,
                  const TrainingConfig& config);

// SMR estimate from a trained model. Baseline: direct forward output.
// Difference: 1 - Q(reference, variant), clamped to [0, 1].
double predict_smr(const MlpRegressor& model, ModelKind kind,
                   std::span<const double> reference,
                   std::span<const double> variant);

// Max relative error between backprop and central finite differences
// (step 1e-5) over all parameters. Targets sitting exactly on the L1 kink
// are nudged off it first.
double gradient_check(const MlpRegressor& model,
                      std::vector<TrainSample> batch,
                      MlpRegressor::Loss loss = MlpRegressor::Loss::kL1);

// --- Feature/table assembly --------------------------------------------------

// Feature vectors and SMR targets for one image across its table's levels
// (ORIGINAL first).
struct ImageFeatureSeries {
  std::string image;
  std::vector<QualityLevel> levels;
  std::vector<std::vector<double>> vectors;
  std::vector<double> smr_values;
};

std::vector<ImageFeatureSeries> collect_series(const FeatureSet& features,
                                               const std::string& extractor,
                                               const std::vector<SmrTable>& tables);

// Baseline task: fixed samples (h_0 (+) h_q -> SMR(q)) for every level.
class BaselineDataset : public SampleSource {
 public:
  explicit BaselineDataset(const std::vector<ImageFeatureSeries>& series);
  std::size_t epoch_size() const override { return samples_.size(); }
  void epoch_samples(int epoch, std::vector<TrainSample>& out) override;

 private:
  std::vector<TrainSample> samples_;
};

// Difference task: per image and epoch, random level pairs
// (h_qi (+) h_qj -> |SMR(qi) - SMR(qj)|), ORIGINAL included as a drawable
// level. pairs_per_image = 0 draws one pair per table level.
class DifferencePairSource : public SampleSource {
 public:
  DifferencePairSource(const std::vector<ImageFeatureSeries>& series,
                       std::uint64_t seed, int pairs_per_image = 0);
  std::size_t epoch_size() const override;
  void epoch_samples(int epoch, std::vector<TrainSample>& out) override;

 private:
  const std::vector<ImageFeatureSeries>* series_;
  std::uint64_t seed_;
  int pairs_per_image_;
};

// --- Correlation study --------------------------------------------------------

struct CorrelationPoint {
  QualityLevel level;
  double mean_difference = 0;  // cosine, averaged over the machine library
  double smr = 0;
};

struct CorrelationResult {
  std::string image;
  std::vector<CorrelationPoint> points;
  std::array<double, 4> cubic{};  // least-squares fit smr ~ cubic(mean D)
  double pearson = 0;
  double spearman = 0;
  bool spearman_defined = false;
  bool fit_defined = false;  // false when < 4 distinct D values
};

// Per-image (mean feature difference, SMR) scatter with a cubic fit and
// rank statistics. `extractors` empty means every extractor in the set.
std::vector<CorrelationResult> correlation_study(
    const FeatureSet& features, std::vector<std::string> extractors,
    const std::vector<SmrTable>& tables);

std::string correlation_to_csv(const std::vector<CorrelationResult>& results);
std::string correlation_summary_to_json(
    const std::vector<CorrelationResult>& results);

std::string loss_trace_to_csv(const TrainResult& result);

}  // namespace smrkit
