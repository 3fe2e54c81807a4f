#include "smrkit/cli.hpp"

#include <functional>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "smrkit/analysis.hpp"
#include "smrkit/coding_opt.hpp"
#include "smrkit/io.hpp"
#include "smrkit/predictor.hpp"
#include "smrkit/records.hpp"
#include "smrkit/smr.hpp"

namespace smrkit::cli {

using nlohmann::json;

namespace {

struct LoadedInputs {
  DatasetManifest manifest;
  PerceptionSet records;
  FeatureSet features;
  BitrateSet bitrates;
};

LoadedInputs load_inputs(const RunConfig& config, bool need_records,
                         bool need_features, bool need_bitrates) {
  LoadedInputs in;
  if (config.manifest_path.empty()) {
    throw std::runtime_error("--manifest is required");
  }
  in.manifest = load_manifest(config.manifest_path);
  if (need_records) {
    if (config.record_paths.empty()) {
      throw std::runtime_error("--records is required for this command");
    }
    in.records = ingest_perceptions(config.record_paths, in.manifest.task,
                                    &in.manifest);
  }
  if (need_features) {
    if (config.feature_paths.empty()) {
      throw std::runtime_error("--features is required for this command");
    }
    in.features = ingest_features(config.feature_paths, &in.manifest);
  }
  if (need_bitrates) {
    if (config.bitrate_paths.empty()) {
      throw std::runtime_error("--bitrates is required for this command");
    }
    in.bitrates = ingest_bitrates(config.bitrate_paths, &in.manifest);
  }
  return in;
}

AnnotateOptions annotate_options(const RunConfig& config) {
  AnnotateOptions options;
  options.strict = config.strict;
  options.exclude_vacuous = config.exclude_vacuous;
  options.workers = config.workers;
  return options;
}

std::vector<SmrType> parse_types(const RunConfig& config) {
  if (config.smr_types.empty()) {
    throw std::runtime_error("at least one --smr-type is required");
  }
  std::vector<SmrType> types;
  for (const std::string& name : config.smr_types) {
    types.push_back(SmrType::parse(name));
  }
  return types;
}

std::string resolve_extractor(const FeatureSet& features,
                              const std::string& requested) {
  if (!requested.empty()) {
    features.dimension(requested);  // throws when absent
    return requested;
  }
  const std::vector<std::string> all = features.extractors();
  if (all.size() != 1) {
    throw std::runtime_error(
        "feature set has " + std::to_string(all.size()) +
        " extractors; disambiguate with --extractor");
  }
  return all.front();
}

std::vector<SmrTable> tables_for(const RunConfig& config,
                                 const LoadedInputs& in, const SmrType& type,
                                 const std::filesystem::path& tables_path) {
  if (!tables_path.empty()) {
    return tables_from_csv(read_file(tables_path));
  }
  return annotate(in.manifest, in.records, type, annotate_options(config));
}

void write_out(const RunConfig& config, const std::string& name,
               const std::string& content) {
  write_file_atomic(config.out_dir / name, content);
  std::cout << "wrote " << (config.out_dir / name).string() << "\n";
}

// Runs fn under a stage label so pipeline failures name the stage.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

json distribution_to_json(const SmrDistribution& dist) {
  json obj = json::object();
  for (const auto& [level, mean] : dist.mean_smr) {
    obj[std::to_string(level.qp())] = round_num(mean);
  }
  return obj;
}

}  // namespace

std::string predictions_to_csv(const PredictionMap& predictions) {
  std::string out = "image,qp,predicted_smr\n";
  for (const auto& [image, by_level] : predictions) {
    for (const auto& [level, value] : by_level) {
      out += image;
      out += ',';
      out += std::to_string(level.qp());
      out += ',';
      out += format_num(value);
      out += '\n';
    }
  }
  return out;
}

PredictionMap predictions_from_csv(const std::string& text) {
  PredictionMap map;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (line_no == 1 && !f.empty() && f[0] == "image") continue;
    if (f.size() != 3) {
      throw std::runtime_error("predictions CSV line " +
                               std::to_string(line_no) + ": expected 3 fields");
    }
    try {
      map[f[0]][QualityLevel::from_qp(std::stoi(f[1]))] = std::stod(f[2]);
    } catch (const std::exception& e) {
      throw std::runtime_error("predictions CSV line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  if (map.empty()) {
    throw std::runtime_error("predictions CSV is empty");
  }
  return map;
}

int run_ingest(const RunConfig& config) {
  const LoadedInputs in = load_inputs(config, true, false, false);
  std::cout << "manifest: task " << to_string(in.manifest.task) << ", "
            << in.manifest.machines.size() << " machines, "
            << in.manifest.images.size() << " images, ladder of "
            << in.manifest.ladder.size() << " coded levels\n";
  std::cout << "perception records: " << in.records.size() << "\n";
  if (!config.feature_paths.empty()) {
    const FeatureSet features = ingest_features(config.feature_paths,
                                                &in.manifest);
    std::cout << "feature records: " << features.size() << " from "
              << features.extractors().size() << " extractor(s)\n";
  }
  if (!config.bitrate_paths.empty()) {
    const BitrateSet bitrates = ingest_bitrates(config.bitrate_paths,
                                                &in.manifest);
    std::cout << "bitrate records: " << bitrates.size() << "\n";
  }
  const CompletenessReport report =
      validate_completeness(in.manifest, in.records);
  if (report.complete()) {
    std::cout << "completeness: all cells present\n";
  } else {
    std::cout << "completeness: " << report.missing.size()
              << " missing cell(s), first " << describe(report.missing.front())
              << "\n";
    if (config.strict) {
      throw std::runtime_error(
          "strict mode: records are incomplete (" +
          std::to_string(report.missing.size()) + " missing cells)");
    }
  }
  return 0;
}

int run_annotate(const RunConfig& config) {
  const LoadedInputs in = load_inputs(config, true, false, false);
  const std::vector<SmrType> types = parse_types(config);
  json summary;
  summary["task"] = to_string(in.manifest.task);
  summary["machines"] = in.manifest.machines.size();
  summary["images"] = in.manifest.images.size();
  json dists = json::object();
  json vacuous = json::object();
  for (const SmrType& type : types) {
    const std::vector<SmrTable> tables =
        annotate(in.manifest, in.records, type, annotate_options(config));
    write_out(config, "tables_" + type.file_tag() + ".csv",
              tables_to_csv(tables));
    write_out(config, "tables_" + type.file_tag() + ".jsonl",
              tables_to_jsonl(tables));
    const SmrDistribution dist = distribution(tables);
    write_out(config, "distribution_" + type.file_tag() + ".csv",
              distribution_to_csv(dist));
    dists[type.name()] = distribution_to_json(dist);
    json flagged = json::array();
    for (const SmrTable& t : tables) {
      if (t.vacuous) flagged.push_back(t.image);
    }
    vacuous[type.name()] = std::move(flagged);
  }
  summary["distributions"] = std::move(dists);
  summary["vacuous_images"] = std::move(vacuous);
  write_out(config, "annotate_summary.json", summary.dump(2) + "\n");
  return 0;
}

int run_diversity(const RunConfig& config, const DiversityArgs& args) {
  const LoadedInputs in = load_inputs(config, true, false, false);
  DiversityOptions options;
  options.sample_size = args.sample_size;
  options.repetitions = args.repetitions;
  options.seed = config.seed;
  options.t_s = args.t_s;
  options.workers = config.workers;
  const DiversityMatrix matrix = diversity_matrix(in.manifest, in.records,
                                                  options);
  write_out(config, "diversity_matrix.csv", diversity_matrix_to_csv(matrix));
  json summary;
  summary["overall_mean"] = round_num(matrix.overall_mean);
  summary["ladder_size"] = matrix.ladder_size;
  summary["percent_differing"] = round_num(matrix.percent_differing());
  write_out(config, "diversity_summary.json", summary.dump(2) + "\n");
  std::cout << "overall mean diversity " << format_num(matrix.overall_mean)
            << " over " << matrix.ladder_size << " levels ("
            << format_num(matrix.percent_differing()) << "% differing)\n";

  if (args.modification_trials > 0) {
    ModificationExperimentConfig exp;
    exp.trials = args.modification_trials;
    exp.delta_min = args.delta_min;
    exp.delta_max = args.delta_max;
    exp.seed = config.seed;
    exp.t_s = args.t_s;
    const ModificationExperimentResult result =
        modification_experiment(in.manifest, in.records, exp);
    write_out(config, "modification_experiment.json",
              experiment_summary_to_json(result));
    std::cout << "non-ideal modifications: "
              << format_num(100.0 * result.non_ideal_fraction) << "% of "
              << result.trials << " trials\n";
  }
  return 0;
}

int run_jnd(const RunConfig& config, const JndArgs& args) {
  const LoadedInputs in = load_inputs(config, true, false, false);
  const std::vector<JndReport> reports =
      jnd_reports(in.manifest, in.records, args.t_s,
                  DetectionScoringConfig::defaults(), config.workers);
  write_out(config, "jnd_reports.jsonl", jnd_reports_to_jsonl(reports));
  std::size_t with_jnd = 0;
  for (const JndReport& r : reports) {
    if (r.first_jnd.has_value()) ++with_jnd;
  }
  std::cout << with_jnd << " of " << reports.size()
            << " (machine, image) pairs have a JND point\n";
  return 0;
}

int run_correlate(const RunConfig& config, const std::string& extractor,
                  const std::filesystem::path& tables_path) {
  const bool need_records = tables_path.empty();
  const LoadedInputs in = load_inputs(config, need_records, true, false);
  const std::vector<SmrType> types = parse_types(config);
  const std::vector<SmrTable> tables =
      tables_for(config, in, types.front(), tables_path);
  std::vector<std::string> extractors;
  if (!extractor.empty()) extractors.push_back(extractor);
  const std::vector<CorrelationResult> results =
      correlation_study(in.features, extractors, tables);
  write_out(config, "correlation.csv", correlation_to_csv(results));
  write_out(config, "correlation_summary.json",
            correlation_summary_to_json(results));
  return 0;
}

namespace {

struct TrainedModel {
  MlpRegressor model;
  ModelKind kind = ModelKind::kBaseline;
  TrainResult trace;
  std::string extractor;
  TrainingConfig train_config;
};

TrainedModel train_on_tables(const RunConfig& config, const TrainArgs& args,
                             const FeatureSet& features,
                             const std::vector<SmrTable>& tables) {
  TrainedModel out;
  out.kind = model_kind_from_string(args.model);
  out.extractor = resolve_extractor(features, args.extractor);
  const std::vector<ImageFeatureSeries> series =
      collect_series(features, out.extractor, tables);

  const int dim = static_cast<int>(features.dimension(out.extractor));
  TrainingConfig train_config;
  train_config.kind = out.kind;
  train_config.learning_rate = args.learning_rate;
  train_config.epochs = args.epochs;
  train_config.batch_size = args.batch_size;
  train_config.seed = config.seed;
  std::vector<int> sizes = args.hidden_sizes.empty()
                               ? MlpRegressor::default_layer_sizes(2 * dim)
                               : std::vector<int>{};
  if (!args.hidden_sizes.empty()) {
    sizes.push_back(2 * dim);
    sizes.insert(sizes.end(), args.hidden_sizes.begin(),
                 args.hidden_sizes.end());
    sizes.push_back(1);
  }
  out.model = MlpRegressor(sizes, config.seed);

  if (out.kind == ModelKind::kBaseline) {
    BaselineDataset source(series);
    out.trace = train(out.model, source, train_config);
  } else {
    DifferencePairSource source(series, config.seed, args.pairs_per_image);
    out.trace = train(out.model, source, train_config);
  }
  out.train_config = train_config;
  return out;
}

PredictionMap predict_all(const DatasetManifest& manifest,
                          const FeatureSet& features,
                          const std::string& extractor,
                          const MlpRegressor& model, ModelKind kind) {
  PredictionMap predictions;
  for (const std::string& image : manifest.images) {
    const FeatureRecord& reference =
        features.at(extractor, image, QualityLevel::original());
    auto& slot = predictions[image];
    for (QualityLevel level : manifest.ladder.coded()) {
      const FeatureRecord& variant = features.at(extractor, image, level);
      slot[level] = predict_smr(model, kind, reference.vec, variant.vec);
    }
  }
  return predictions;
}

}  // namespace

int run_train(const RunConfig& config, const TrainArgs& args) {
  const bool need_records = args.tables_path.empty();
  const LoadedInputs in = load_inputs(config, need_records, true, false);
  const std::vector<SmrType> types = parse_types(config);
  const std::vector<SmrTable> tables =
      tables_for(config, in, types.front(), args.tables_path);
  const TrainedModel trained = train_on_tables(config, args, in.features,
                                               tables);
  const std::string name = "model_" + args.model + ".json";
  trained.model.save(config.out_dir / name, trained.kind, config.seed,
                     &trained.train_config);
  std::cout << "wrote " << (config.out_dir / name).string() << "\n";
  write_out(config, "loss_trace_" + args.model + ".csv",
            loss_trace_to_csv(trained.trace));
  std::cout << "final epoch mean L1: "
            << format_num(trained.trace.epoch_loss.back()) << "\n";
  return 0;
}

int run_predict(const RunConfig& config, const PredictArgs& args) {
  const LoadedInputs in = load_inputs(config, false, true, false);
  const LoadedModel loaded = load_model(args.model_path);
  const std::string extractor = resolve_extractor(in.features, args.extractor);
  const PredictionMap predictions = predict_all(
      in.manifest, in.features, extractor, loaded.model, loaded.kind);
  write_out(config, "predictions.csv", predictions_to_csv(predictions));
  return 0;
}

int run_optimize(const RunConfig& config, const OptimizeArgs& args) {
  const LoadedInputs in = load_inputs(config, false, false, true);
  const ThresholdSet thresholds = ThresholdSet::parse(config.thresholds);
  const SmrDistribution dist =
      distribution_from_csv(read_file(args.distribution_path));
  const std::vector<SmrTable> gt_tables =
      tables_from_csv(read_file(args.tables_path));

  std::vector<QpDecision> decisions;
  std::string label = args.label;
  if (args.constant_qp) {
    if (label.empty()) label = "constant-qp";
    decisions = decide_constant(in.manifest.images, thresholds, dist,
                                in.manifest.ladder);
  } else {
    if (label.empty()) label = "guided";
    const PredictionMap predictions =
        predictions_from_csv(read_file(args.predictions_path));
    decisions = decide_guided(in.manifest.images, thresholds, dist,
                              in.manifest.ladder, predictions);
  }
  const RateSmrCurve curve =
      build_curve(decisions, in.bitrates, gt_tables, thresholds, label);
  write_out(config, "decisions_" + label + ".csv", decisions_to_csv(decisions));
  write_out(config, "curve_" + label + ".csv", curve_to_csv(curve));
  return 0;
}

int run_bdrate(const RunConfig& config, const BdRateArgs& args) {
  const RateSmrCurve anchor = curve_from_csv(read_file(args.anchor_path));
  const RateSmrCurve test = curve_from_csv(read_file(args.test_path));
  const BdRateResult result =
      bd_rate(anchor, test,
              args.piecewise ? BdRateMethod::kPiecewiseCubic
                             : BdRateMethod::kCubic);
  const std::string report =
      bd_rate_report_to_json(anchor.label, test.label, result);
  write_out(config, "bdrate.json", report);
  std::cout << "BD-rate(" << test.label << " vs " << anchor.label
            << ") = " << format_num(result.percent) << "%\n";
  return 0;
}

int run_report(const RunConfig& config, const ReportArgs& args) {
  const LoadedInputs in = load_inputs(config, true, false, false);
  const std::vector<SmrType> types = parse_types(config);
  json report;

  json dists = json::object();
  for (const SmrType& type : types) {
    const std::vector<SmrTable> tables =
        annotate(in.manifest, in.records, type, annotate_options(config));
    dists[type.name()] = distribution_to_json(distribution(tables));
  }
  report["distributions"] = std::move(dists);

  if (in.manifest.task == Task::kClassification) {
    const auto t1 = annotate(in.manifest, in.records, SmrType::top_k(1),
                             annotate_options(config));
    const auto t3 = annotate(in.manifest, in.records, SmrType::top_k(3),
                             annotate_options(config));
    const auto t5 = annotate(in.manifest, in.records, SmrType::top_k(5),
                             annotate_options(config));
    report["ordering_violations"] = ordering_check({t1, t3, t5}).size();
  }

  if (!args.subset_sizes.empty()) {
    std::string csv = "n_m,repetitions,mean_mae\n";
    json subset = json::array();
    for (int n_m : args.subset_sizes) {
      const SubsetConsistencyResult r = subset_consistency(
          in.manifest, in.records, types.front(), n_m, args.repetitions,
          config.seed, annotate_options(config));
      csv += std::to_string(n_m) + "," + std::to_string(args.repetitions) +
             "," + format_num(r.mean_mae) + "\n";
      json item;
      item["n_m"] = n_m;
      item["mean_mae"] = round_num(r.mean_mae);
      subset.push_back(std::move(item));
    }
    write_out(config, "subset_mae.csv", csv);
    report["subset_consistency"] = std::move(subset);
  }

  write_out(config, "report.json", report.dump(2) + "\n");
  return 0;
}

int run_pipeline(const RunConfig& config, const PipelineArgs& args) {
  const LoadedInputs in = stage("ingest", [&] {
    return load_inputs(config, true, true, true);
  });
  const std::vector<SmrType> types = parse_types(config);
  const SmrType& type = types.front();
  const ThresholdSet thresholds = ThresholdSet::parse(config.thresholds);

  // Ground-truth tables and distribution.
  const std::vector<SmrTable> tables = stage("annotate", [&] {
    auto t = annotate(in.manifest, in.records, type, annotate_options(config));
    write_out(config, "tables_" + type.file_tag() + ".csv", tables_to_csv(t));
    return t;
  });
  const SmrDistribution dist = stage("annotate", [&] {
    auto d = distribution(tables);
    write_out(config, "distribution_" + type.file_tag() + ".csv",
              distribution_to_csv(d));
    return d;
  });

  // Images present in the tables (vacuous exclusion may drop some).
  std::vector<std::string> images;
  images.reserve(tables.size());
  for (const SmrTable& t : tables) images.push_back(t.image);

  const TrainedModel trained = stage("train", [&] {
    auto t = train_on_tables(config, args.train, in.features, tables);
    t.model.save(config.out_dir / ("model_" + args.train.model + ".json"),
                 t.kind, config.seed, &t.train_config);
    std::cout << "wrote "
              << (config.out_dir / ("model_" + args.train.model + ".json"))
                     .string()
              << "\n";
    write_out(config, "loss_trace_" + args.train.model + ".csv",
              loss_trace_to_csv(t.trace));
    return t;
  });

  const PredictionMap predicted = stage("predict", [&] {
    auto p = predict_all(in.manifest, in.features, trained.extractor,
                         trained.model, trained.kind);
    write_out(config, "predictions.csv", predictions_to_csv(p));
    return p;
  });

  struct Arm {
    std::string label;
    std::vector<QpDecision> decisions;
    RateSmrCurve curve;
  };
  std::vector<Arm> arms = stage("optimize", [&] {
    std::vector<Arm> out;
    out.push_back({"constant-qp",
                   decide_constant(images, thresholds, dist,
                                   in.manifest.ladder),
                   {}});
    out.push_back({"gt-guided",
                   decide_guided(images, thresholds, dist, in.manifest.ladder,
                                 predictions_from_tables(tables)),
                   {}});
    out.push_back({"predicted-guided",
                   decide_guided(images, thresholds, dist, in.manifest.ladder,
                                 predicted),
                   {}});
    for (Arm& arm : out) {
      arm.curve = build_curve(arm.decisions, in.bitrates, tables, thresholds,
                              arm.label);
      write_out(config, "decisions_" + arm.label + ".csv",
                decisions_to_csv(arm.decisions));
      write_out(config, "curve_" + arm.label + ".csv", curve_to_csv(arm.curve));
    }
    return out;
  });

  const json bd = stage("bdrate", [&] {
    json reports = json::array();
    for (std::size_t a = 0; a < arms.size(); ++a) {
      for (std::size_t t = a + 1; t < arms.size(); ++t) {
        const BdRateResult r = bd_rate(arms[a].curve, arms[t].curve);
        json item;
        item["anchor"] = arms[a].label;
        item["test"] = arms[t].label;
        item["bd_rate_percent"] = round_num(r.percent);
        item["smr_overlap"] = {round_num(r.overlap_lo),
                               round_num(r.overlap_hi)};
        reports.push_back(std::move(item));
        std::cout << "BD-rate(" << arms[t].label << " vs " << arms[a].label
                  << ") = " << format_num(r.percent) << "%\n";
      }
    }
    write_out(config, "bdrate.json", reports.dump(2) + "\n");
    return reports;
  });

  stage("report", [&] {
    json summary;
    summary["smr_type"] = type.name();
    summary["thresholds"] = config.thresholds;
    summary["seed"] = config.seed;
    summary["model"] = args.train.model;
    summary["images"] = images.size();
    summary["machines"] = in.manifest.machines.size();
    summary["distribution"] = distribution_to_json(dist);
    summary["bd_rates"] = bd;
    summary["final_train_loss"] = round_num(trained.trace.epoch_loss.back());
    write_out(config, "summary.json", summary.dump(2) + "\n");
    return 0;
  });
  return 0;
}

}  // namespace smrkit::cli
