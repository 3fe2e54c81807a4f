#include "smrkit/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "smrkit/io.hpp"
#include "smrkit/numeric.hpp"
#include "smrkit/rng.hpp"

namespace smrkit {

using nlohmann::json;

double feature_difference(std::span<const double> variant,
                          std::span<const double> reference) {
  if (variant.size() != reference.size()) {
    throw std::runtime_error("feature dimension mismatch: " +
                             std::to_string(variant.size()) + " vs " +
                             std::to_string(reference.size()));
  }
  if (variant.empty()) {
    throw std::runtime_error("feature vectors are empty");
  }
  double dot = 0;
  double nv = 0;
  double nr = 0;
  for (std::size_t i = 0; i < variant.size(); ++i) {
    dot += variant[i] * reference[i];
    nv += variant[i] * variant[i];
    nr += reference[i] * reference[i];
  }
  if (nv == 0 || nr == 0) {
    throw std::runtime_error("cosine similarity undefined for zero-norm vector");
  }
  return dot / (std::sqrt(nv) * std::sqrt(nr));
}

std::vector<double> FeaturePair::concatenated() const {
  if (reference.size() != variant.size()) {
    throw std::runtime_error("feature pair dimensions differ");
  }
  std::vector<double> h;
  h.reserve(reference.size() * 2);
  h.insert(h.end(), reference.begin(), reference.end());
  h.insert(h.end(), variant.begin(), variant.end());
  return h;
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kBaseline ? "baseline" : "difference";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "baseline") return ModelKind::kBaseline;
  if (s == "difference") return ModelKind::kDifference;
  throw std::runtime_error("unknown model kind: " + s);
}

MlpRegressor::MlpRegressor(std::vector<int> layer_sizes, std::uint64_t seed)
    : layer_sizes_(std::move(layer_sizes)) {
  if (layer_sizes_.size() < 2) {
    throw std::runtime_error("regressor needs at least input and output sizes");
  }
  for (int s : layer_sizes_) {
    if (s < 1) throw std::runtime_error("layer sizes must be positive");
  }
  if (layer_sizes_.back() != 1) {
    throw std::runtime_error("regressor output size must be 1");
  }
  build_views();
  RandomStream stream(seed, "init");
  for (const LayerView& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (int o = 0; o < layer.out; ++o) {
      for (int i = 0; i < layer.in; ++i) {
        params_[layer.w_offset + static_cast<std::size_t>(o) * layer.in + i] =
            stream.uniform_real(-bound, bound);
      }
      params_[layer.b_offset + o] = stream.uniform_real(-bound, bound);
    }
  }
}

std::vector<int> MlpRegressor::default_layer_sizes(int input_dim) {
  if (input_dim < 1) throw std::runtime_error("input dimension must be >= 1");
  return {input_dim, 2 * input_dim, 2 * input_dim, 1};
}

void MlpRegressor::build_views() {
  layers_.clear();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    LayerView view;
    view.in = layer_sizes_[l];
    view.out = layer_sizes_[l + 1];
    view.w_offset = offset;
    offset += static_cast<std::size_t>(view.in) * view.out;
    view.b_offset = offset;
    offset += static_cast<std::size_t>(view.out);
    layers_.push_back(view);
  }
  params_.assign(offset, 0.0);
}

double MlpRegressor::forward_raw(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw std::runtime_error("forward pass input has dimension " +
                             std::to_string(input.size()) + ", expected " +
                             std::to_string(input_dim()));
  }
  std::vector<double> act(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerView& layer = layers_[l];
    next.assign(static_cast<std::size_t>(layer.out), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      double z = params_[layer.b_offset + o];
      const double* w =
          params_.data() + layer.w_offset + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) z += w[i] * act[i];
      // Rectifier between layers, identity on the final output.
      next[o] = (l + 1 < layers_.size() && z < 0) ? 0.0 : z;
    }
    act.swap(next);
  }
  return act[0];
}

double MlpRegressor::forward(std::span<const double> input) const {
  return std::clamp(forward_raw(input), 0.0, 1.0);
}

double MlpRegressor::loss_and_gradient(std::span<const Sample> batch, Loss loss,
                                       std::span<double> grad) const {
  if (batch.empty()) {
    throw std::runtime_error("loss over an empty batch is undefined");
  }
  if (grad.size() != params_.size()) {
    throw std::runtime_error("gradient buffer size mismatch");
  }
  std::fill(grad.begin(), grad.end(), 0.0);

  // Per-layer activations are recomputed per sample; at regressor scale the
  // allocations dominate, so buffers are reused across the batch.
  std::vector<std::vector<double>> acts(layers_.size() + 1);
  std::vector<std::vector<double>> deltas(layers_.size() + 1);

  double total_loss = 0;
  for (const Sample& sample : batch) {
    if (static_cast<int>(sample.input.size()) != input_dim()) {
      throw std::runtime_error("sample input dimension mismatch");
    }
    acts[0].assign(sample.input.begin(), sample.input.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const LayerView& layer = layers_[l];
      acts[l + 1].assign(static_cast<std::size_t>(layer.out), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        double z = params_[layer.b_offset + o];
        const double* w = params_.data() + layer.w_offset +
                          static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) z += w[i] * acts[l][i];
        acts[l + 1][o] = (l + 1 < layers_.size() && z < 0) ? 0.0 : z;
      }
    }
    const double out = acts.back()[0];
    const double diff = out - sample.target;
    double dout = 0;
    if (loss == Loss::kL1) {
      total_loss += std::abs(diff);
      dout = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    } else {
      total_loss += 0.5 * diff * diff;
      dout = diff;
    }

    deltas.back().assign(1, dout);
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const LayerView& layer = layers_[l];
      deltas[l].assign(static_cast<std::size_t>(layer.in), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        // Post-activation zero with a rectifier in front means the unit was
        // clamped; its upstream gradient dies there.
        const bool rectified = l + 1 < layers_.size();
        double d = deltas[l + 1][o];
        if (rectified && acts[l + 1][o] <= 0.0) d = 0.0;
        if (d == 0.0) continue;
        const std::size_t w_base =
            layer.w_offset + static_cast<std::size_t>(o) * layer.in;
        grad[layer.b_offset + o] += d;
        for (int i = 0; i < layer.in; ++i) {
          grad[w_base + i] += d * acts[l][i];
          deltas[l][i] += d * params_[w_base + i];
        }
      }
    }
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= scale;
  return total_loss * scale;
}

void MlpRegressor::save(const std::filesystem::path& path, ModelKind kind,
                        std::uint64_t seed,
                        const TrainingConfig* config) const {
  json doc;
  doc["format"] = "smrkit-mlp-v1";
  doc["kind"] = smrkit::to_string(kind);
  doc["layer_sizes"] = layer_sizes_;
  doc["seed"] = seed;
  if (config != nullptr) {
    doc["config"] = {{"loss", "l1"},
                     {"optimizer", "adam"},
                     {"learning_rate", config->learning_rate},
                     {"epochs", config->epochs},
                     {"batch_size", config->batch_size}};
  }
  doc["params"] = params_;
  write_file_atomic(path, doc.dump(2) + "\n");
}

MlpRegressor MlpRegressor::from_parameters(std::vector<int> layer_sizes,
                                           std::vector<double> params) {
  MlpRegressor model;
  model.layer_sizes_ = std::move(layer_sizes);
  if (model.layer_sizes_.size() < 2 || model.layer_sizes_.back() != 1) {
    throw std::runtime_error("invalid layer sizes for regressor");
  }
  model.build_views();
  if (params.size() != model.params_.size()) {
    throw std::runtime_error("parameter count mismatch: expected " +
                             std::to_string(model.params_.size()) + ", got " +
                             std::to_string(params.size()));
  }
  for (double p : params) {
    if (!std::isfinite(p)) {
      throw std::runtime_error("model parameters must be finite");
    }
  }
  model.params_ = std::move(params);
  return model;
}

LoadedModel load_model(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("model file " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "smrkit-mlp-v1") {
    throw std::runtime_error("model file " + path.string() +
                             ": unsupported format");
  }
  LoadedModel loaded;
  loaded.kind = model_kind_from_string(doc.at("kind").get<std::string>());
  loaded.seed = doc.at("seed").get<std::uint64_t>();
  loaded.model = MlpRegressor::from_parameters(
      doc.at("layer_sizes").get<std::vector<int>>(),
      doc.at("params").get<std::vector<double>>());
  return loaded;
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0)) {
    throw std::runtime_error("learning rate must be > 0");
  }
  if (epochs < 1) throw std::runtime_error("epochs must be >= 1");
  if (batch_size < 1) throw std::runtime_error("batch size must be >= 1");
}

TrainResult train(MlpRegressor& model, SampleSource& source,
                  const TrainingConfig& config) {
  config.validate();
  if (source.epoch_size() == 0) {
    throw std::runtime_error("training dataset is empty");
  }

  // Adam moment buffers over the flat parameter view.
  std::vector<double> m(model.param_count(), 0.0);
  std::vector<double> v(model.param_count(), 0.0);
  std::vector<double> grad(model.param_count(), 0.0);
  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double eps = 1e-8;
  long long step = 0;

  TrainResult result;
  std::vector<TrainSample> samples;
  std::vector<std::size_t> order;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    source.epoch_samples(epoch, samples);
    if (samples.empty()) {
      throw std::runtime_error("sample source produced an empty epoch");
    }
    order.resize(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream batch_stream(config.seed, "batch/" + std::to_string(epoch));
    batch_stream.shuffle(order);

    double epoch_loss = 0;
    std::size_t cursor = 0;
    std::vector<TrainSample> batch;
    while (cursor < order.size()) {
      const std::size_t take = std::min<std::size_t>(
          static_cast<std::size_t>(config.batch_size), order.size() - cursor);
      batch.clear();
      for (std::size_t i = 0; i < take; ++i) {
        batch.push_back(samples[order[cursor + i]]);
      }
      cursor += take;

      const double loss =
          model.loss_and_gradient(batch, MlpRegressor::Loss::kL1, grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged at epoch " +
                                 std::to_string(epoch) + " (non-finite loss)");
      }
      epoch_loss += loss * static_cast<double>(take);

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < grad.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        model.set_param(i, model.param(i) - config.learning_rate * m_hat /
                                                (std::sqrt(v_hat) + eps));
      }
    }
    result.epoch_loss.push_back(epoch_loss /
                                static_cast<double>(order.size()));
  }
  return result;
}

double predict_smr(const MlpRegressor& model, ModelKind kind,
                   std::span<const double> reference,
                   std::span<const double> variant) {
  if (reference.size() != variant.size()) {
    throw std::runtime_error("reference/variant dimensions differ");
  }
  std::vector<double> input;
  input.reserve(reference.size() * 2);
  input.insert(input.end(), reference.begin(), reference.end());
  input.insert(input.end(), variant.begin(), variant.end());
  const double out = model.forward(input);
  if (kind == ModelKind::kBaseline) return out;
  return std::clamp(1.0 - out, 0.0, 1.0);
}

double gradient_check(const MlpRegressor& model, std::vector<TrainSample> batch,
                      MlpRegressor::Loss loss) {
  if (batch.empty()) {
    throw std::runtime_error("gradient check needs a nonempty batch");
  }
  MlpRegressor probe = model;
  if (loss == MlpRegressor::Loss::kL1) {
    // The L1 subgradient is undefined where prediction equals target; nudge
    // such targets off the kink.
    for (TrainSample& s : batch) {
      if (std::abs(probe.forward_raw(s.input) - s.target) < 1e-6) {
        s.target += 1e-3;
      }
    }
  }
  std::vector<double> grad(probe.param_count(), 0.0);
  probe.loss_and_gradient(batch, loss, grad);

  const double step = 1e-5;
  double max_rel = 0;
  std::vector<double> dummy(probe.param_count(), 0.0);
  for (std::size_t i = 0; i < probe.param_count(); ++i) {
    const double saved = probe.param(i);
    probe.set_param(i, saved + step);
    const double up = probe.loss_and_gradient(batch, loss, dummy);
    probe.set_param(i, saved - step);
    const double down = probe.loss_and_gradient(batch, loss, dummy);
    probe.set_param(i, saved);
    const double fd = (up - down) / (2.0 * step);
    const double denom = std::max(std::abs(fd) + std::abs(grad[i]), 1e-8);
    max_rel = std::max(max_rel, std::abs(fd - grad[i]) / denom);
  }
  return max_rel;
}

std::vector<ImageFeatureSeries> collect_series(const FeatureSet& features,
                                               const std::string& extractor,
                                               const std::vector<SmrTable>& tables) {
  std::vector<ImageFeatureSeries> series;
  series.reserve(tables.size());
  for (const SmrTable& table : tables) {
    ImageFeatureSeries s;
    s.image = table.image;
    for (const auto& [level, entry] : table.entries) {
      const FeatureRecord& rec = features.at(extractor, table.image, level);
      s.levels.push_back(level);
      s.vectors.push_back(rec.vec);
      s.smr_values.push_back(entry.smr);
    }
    if (s.levels.empty() || !s.levels.front().is_original()) {
      throw std::runtime_error("SMR table for " + table.image +
                               " lacks an ORIGINAL entry");
    }
    series.push_back(std::move(s));
  }
  return series;
}

BaselineDataset::BaselineDataset(const std::vector<ImageFeatureSeries>& series) {
  for (const ImageFeatureSeries& s : series) {
    const std::vector<double>& reference = s.vectors.front();
    for (std::size_t i = 0; i < s.levels.size(); ++i) {
      TrainSample sample;
      sample.input = FeaturePair{reference, s.vectors[i]}.concatenated();
      sample.target = s.smr_values[i];
      samples_.push_back(std::move(sample));
    }
  }
}

void BaselineDataset::epoch_samples(int /*epoch*/,
                                    std::vector<TrainSample>& out) {
  out = samples_;
}

DifferencePairSource::DifferencePairSource(
    const std::vector<ImageFeatureSeries>& series, std::uint64_t seed,
    int pairs_per_image)
    : series_(&series), seed_(seed), pairs_per_image_(pairs_per_image) {}

std::size_t DifferencePairSource::epoch_size() const {
  std::size_t total = 0;
  for (const ImageFeatureSeries& s : *series_) {
    total += pairs_per_image_ > 0 ? static_cast<std::size_t>(pairs_per_image_)
                                  : s.levels.size();
  }
  return total;
}

void DifferencePairSource::epoch_samples(int epoch,
                                         std::vector<TrainSample>& out) {
  out.clear();
  RandomStream stream(seed_, "pairs/" + std::to_string(epoch));
  for (const ImageFeatureSeries& s : *series_) {
    const std::size_t n_levels = s.levels.size();
    if (n_levels < 2) continue;
    const std::size_t n_pairs = pairs_per_image_ > 0
                                    ? static_cast<std::size_t>(pairs_per_image_)
                                    : n_levels;
    for (std::size_t p = 0; p < n_pairs; ++p) {
      const std::size_t i = stream.uniform_index(n_levels);
      std::size_t j = stream.uniform_index(n_levels - 1);
      if (j >= i) ++j;
      TrainSample sample;
      sample.input = FeaturePair{s.vectors[i], s.vectors[j]}.concatenated();
      sample.target = std::abs(s.smr_values[i] - s.smr_values[j]);
      out.push_back(std::move(sample));
    }
  }
}

std::vector<CorrelationResult> correlation_study(
    const FeatureSet& features, std::vector<std::string> extractors,
    const std::vector<SmrTable>& tables) {
  if (extractors.empty()) extractors = features.extractors();
  if (extractors.empty()) {
    throw std::runtime_error("correlation study requires feature records");
  }
  std::vector<CorrelationResult> results;
  results.reserve(tables.size());
  for (const SmrTable& table : tables) {
    CorrelationResult res;
    res.image = table.image;
    for (const auto& [level, entry] : table.entries) {
      double sum = 0;
      for (const std::string& ex : extractors) {
        const FeatureRecord& variant = features.at(ex, table.image, level);
        const FeatureRecord& reference =
            features.at(ex, table.image, QualityLevel::original());
        sum += feature_difference(variant.vec, reference.vec);
      }
      res.points.push_back(CorrelationPoint{
          level, sum / static_cast<double>(extractors.size()), entry.smr});
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (const CorrelationPoint& p : res.points) {
      xs.push_back(p.mean_difference);
      ys.push_back(p.smr);
    }
    const std::set<double> distinct(xs.begin(), xs.end());
    if (distinct.size() >= 4) {
      res.cubic = cubic_fit(xs, ys);
      res.fit_defined = true;
    } else if (distinct.size() == 1) {
      // Constant scatter: the fit degenerates to the constant polynomial.
      res.cubic = {ys.empty() ? 0.0 : ys.front(), 0.0, 0.0, 0.0};
      res.fit_defined = true;
      double mean = 0;
      for (double y : ys) mean += y;
      res.cubic[0] = mean / static_cast<double>(ys.size());
    }
    res.pearson = xs.size() >= 2 ? pearson_correlation(xs, ys) : 0.0;
    res.spearman = xs.size() >= 2
                       ? spearman_correlation(xs, ys, res.spearman_defined)
                       : 0.0;
    results.push_back(std::move(res));
  }
  return results;
}

std::string correlation_to_csv(const std::vector<CorrelationResult>& results) {
  std::string out = "image,qp,mean_difference,smr\n";
  for (const CorrelationResult& r : results) {
    for (const CorrelationPoint& p : r.points) {
      out += r.image;
      out += ',';
      out += std::to_string(p.level.qp());
      out += ',';
      out += format_num(p.mean_difference);
      out += ',';
      out += format_num(p.smr);
      out += '\n';
    }
  }
  return out;
}

std::string correlation_summary_to_json(
    const std::vector<CorrelationResult>& results) {
  json doc = json::array();
  for (const CorrelationResult& r : results) {
    json item;
    item["image"] = r.image;
    if (r.fit_defined) {
      item["cubic"] = {round_num(r.cubic[0]), round_num(r.cubic[1]),
                       round_num(r.cubic[2]), round_num(r.cubic[3])};
    } else {
      item["cubic"] = nullptr;
    }
    item["pearson"] = round_num(r.pearson);
    if (r.spearman_defined) {
      item["spearman"] = round_num(r.spearman);
    } else {
      item["spearman"] = nullptr;
    }
    doc.push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

std::string loss_trace_to_csv(const TrainResult& result) {
  std::string out = "epoch,mean_l1\n";
  for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_num(result.epoch_loss[i]);
    out += '\n';
  }
  return out;
}

}  // namespace smrkit
