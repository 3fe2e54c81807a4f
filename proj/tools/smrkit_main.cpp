// smrkit: SMR annotation, analysis, prediction, and SMR-guided QP selection
// over externally produced perception, feature, and bitrate records.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smrkit/cli.hpp"

namespace {

void add_common(CLI::App* cmd, smrkit::cli::RunConfig& config,
                bool with_types = true) {
  cmd->add_option("--manifest", config.manifest_path,
                  "dataset manifest JSON (task, ladder, machines, images)");
  cmd->add_option("--records", config.record_paths,
                  "perception record JSONL file(s)");
  cmd->add_option("--features", config.feature_paths,
                  "feature record JSONL file(s)");
  cmd->add_option("--bitrates", config.bitrate_paths, "bitrate CSV file(s)");
  if (with_types) {
    cmd->add_option("--smr-type", config.smr_types,
                    "SMR type(s): topK[@lib] or det:TS[:IOU]");
  }
  cmd->add_option("--thresholds", config.thresholds,
                  "SMR threshold set (list or lo:step:hi)");
  cmd->add_option("--seed", config.seed, "global random seed")
      ->envname("SMRKIT_SEED");
  cmd->add_option("--out", config.out_dir, "output directory");
  cmd->add_flag("--strict,!--lenient", config.strict,
                "fail on missing cells (default) / aggregate present machines");
  cmd->add_option("--workers", config.workers, "worker pool size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "smrkit: satisfied-machine-ratio annotation, analysis, prediction, "
      "and rate-SMR coding optimization"};
  app.require_subcommand(1);

  smrkit::cli::RunConfig config;
  smrkit::cli::TrainArgs train_args;
  smrkit::cli::DiversityArgs diversity_args;
  smrkit::cli::JndArgs jnd_args;
  smrkit::cli::PredictArgs predict_args;
  smrkit::cli::OptimizeArgs optimize_args;
  smrkit::cli::BdRateArgs bdrate_args;
  smrkit::cli::ReportArgs report_args;
  smrkit::cli::PipelineArgs pipeline_args;
  std::string correlate_extractor;
  std::filesystem::path correlate_tables;

  CLI::App* ingest = app.add_subcommand(
      "ingest", "validate inputs and report completeness");
  add_common(ingest, config, false);

  CLI::App* annotate = app.add_subcommand(
      "annotate", "compute ground-truth SMR tables and distributions");
  add_common(annotate, config);
  annotate->add_flag("--exclude-vacuous", config.exclude_vacuous,
                     "drop detection images whose pseudo ground truth is "
                     "empty for some machine");

  CLI::App* diversity = app.add_subcommand(
      "diversity", "pairwise machine diversity and the codec-modification "
                   "experiment");
  add_common(diversity, config, false);
  diversity->add_option("--sample", diversity_args.sample_size,
                        "images sampled per repetition (0 = all)");
  diversity->add_option("--repetitions", diversity_args.repetitions,
                        "number of image-sample repetitions");
  diversity->add_option("--ts", diversity_args.t_s,
                        "satisfaction threshold for detection labels");
  diversity->add_option("--trials", diversity_args.modification_trials,
                        "also run N codec-modification trials");
  diversity->add_option("--delta-min", diversity_args.delta_min,
                        "modification delta lower bound");
  diversity->add_option("--delta-max", diversity_args.delta_max,
                        "modification delta upper bound");

  CLI::App* jnd = app.add_subcommand("jnd", "locate per-machine JND points");
  add_common(jnd, config, false);
  jnd->add_option("--ts", jnd_args.t_s, "detection JND threshold");

  CLI::App* correlate = app.add_subcommand(
      "correlate", "feature-difference vs SMR correlation study");
  add_common(correlate, config);
  correlate->add_option("--extractor", correlate_extractor,
                        "restrict the study to one extractor");
  correlate->add_option("--tables", correlate_tables,
                        "reuse an existing SMR tables CSV");

  CLI::App* train = app.add_subcommand(
      "train", "train an SMR regressor on ingested features");
  add_common(train, config);
  train->add_option("--model", train_args.model, "baseline | difference");
  train->add_option("--extractor", train_args.extractor, "feature extractor id");
  train->add_option("--lr", train_args.learning_rate, "learning rate");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--batch", train_args.batch_size, "mini-batch size");
  train->add_option("--pairs-per-image", train_args.pairs_per_image,
                    "difference model: pairs drawn per image per epoch");
  train->add_option("--hidden", train_args.hidden_sizes,
                    "hidden layer sizes (default 4d 4d)")
      ->delimiter(',');
  train->add_option("--tables", train_args.tables_path,
                    "reuse an existing SMR tables CSV");

  CLI::App* predict = app.add_subcommand(
      "predict", "predict SMR for every image and coded level");
  add_common(predict, config, false);
  predict->add_option("--model", predict_args.model_path, "model checkpoint")
      ->required();
  predict->add_option("--extractor", predict_args.extractor,
                      "feature extractor id");

  CLI::App* optimize = app.add_subcommand(
      "optimize", "SMR-guided QP selection and rate-SMR curve assembly");
  add_common(optimize, config, false);
  optimize->add_option("--distribution", optimize_args.distribution_path,
                       "QP-SMR distribution CSV")
      ->required();
  optimize->add_option("--predictions", optimize_args.predictions_path,
                       "predicted SMR CSV (image,qp,predicted_smr)");
  optimize->add_option("--tables", optimize_args.tables_path,
                       "ground-truth SMR tables CSV (actual SMR source)")
      ->required();
  optimize->add_flag("--constant-qp", optimize_args.constant_qp,
                     "build the constant-QP baseline arm");
  optimize->add_option("--label", optimize_args.label, "curve label");

  CLI::App* bdrate = app.add_subcommand(
      "bdrate", "Bjontegaard delta rate between two rate-SMR curves");
  add_common(bdrate, config, false);
  bdrate->add_option("--anchor", bdrate_args.anchor_path, "anchor curve CSV")
      ->required();
  bdrate->add_option("--test", bdrate_args.test_path, "test curve CSV")
      ->required();
  bdrate->add_flag("--piecewise", bdrate_args.piecewise,
                   "piecewise-cubic sensitivity variant");

  CLI::App* report = app.add_subcommand(
      "report", "dataset study: distributions, top-k ordering, subset MAE");
  add_common(report, config);
  report->add_option("--subset-sizes", report_args.subset_sizes,
                     "machine subset sizes for the MAE study")
      ->delimiter(',');
  report->add_option("--repetitions", report_args.repetitions,
                     "repetitions per subset size");

  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "annotate, train, predict, optimize, and BD-rate end to end");
  add_common(pipeline, config);
  pipeline->add_option("--model", pipeline_args.train.model,
                       "baseline | difference");
  pipeline->add_option("--extractor", pipeline_args.train.extractor,
                       "feature extractor id");
  pipeline->add_option("--lr", pipeline_args.train.learning_rate,
                       "learning rate");
  pipeline->add_option("--epochs", pipeline_args.train.epochs,
                       "training epochs");
  pipeline->add_option("--batch", pipeline_args.train.batch_size,
                       "mini-batch size");
  pipeline->add_option("--pairs-per-image", pipeline_args.train.pairs_per_image,
                       "difference model: pairs drawn per image per epoch");
  pipeline->add_option("--hidden", pipeline_args.train.hidden_sizes,
                       "hidden layer sizes")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return smrkit::cli::run_ingest(config);
    if (annotate->parsed()) return smrkit::cli::run_annotate(config);
    if (diversity->parsed()) {
      return smrkit::cli::run_diversity(config, diversity_args);
    }
    if (jnd->parsed()) return smrkit::cli::run_jnd(config, jnd_args);
    if (correlate->parsed()) {
      return smrkit::cli::run_correlate(config, correlate_extractor,
                                        correlate_tables);
    }
    if (train->parsed()) return smrkit::cli::run_train(config, train_args);
    if (predict->parsed()) return smrkit::cli::run_predict(config, predict_args);
    if (optimize->parsed()) {
      return smrkit::cli::run_optimize(config, optimize_args);
    }
    if (bdrate->parsed()) return smrkit::cli::run_bdrate(config, bdrate_args);
    if (report->parsed()) return smrkit::cli::run_report(config, report_args);
    if (pipeline->parsed()) {
      return smrkit::cli::run_pipeline(config, pipeline_args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand selected\n";
  return 1;
}
