#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smrkit/coding_opt.hpp"

namespace smrkit::cli {

// Options shared by most subcommands. Paths are resolved at invocation;
// outputs land under out_dir and are written atomically.
struct RunConfig {
  std::filesystem::path manifest_path;
  std::vector<std::filesystem::path> record_paths;
  std::vector<std::filesystem::path> feature_paths;
  std::vector<std::filesystem::path> bitrate_paths;
  std::vector<std::string> smr_types = {"top1"};
  std::string thresholds = "0.6:0.05:0.95";
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  bool strict = true;
  bool exclude_vacuous = false;
  int workers = 1;
};

struct TrainArgs {
  std::string model = "baseline";  // baseline | difference
  std::string extractor;           // empty: the record set's sole extractor
  double learning_rate = 1e-4;
  int epochs = 200;
  int batch_size = 32;
  int pairs_per_image = 0;  // difference model: 0 = one pair per level
  std::vector<int> hidden_sizes;
  std::filesystem::path tables_path;  // optional: reuse existing tables CSV
};

struct DiversityArgs {
  std::size_t sample_size = 0;  // 0 = all images
  int repetitions = 1;
  double t_s = 0.5;
  int modification_trials = 0;  // > 0 additionally runs the experiment
  int delta_min = 1;
  int delta_max = 5;
};

struct JndArgs {
  double t_s = 0.5;
};

struct PredictArgs {
  std::filesystem::path model_path;
  std::string extractor;
};

struct OptimizeArgs {
  std::filesystem::path distribution_path;  // qp,mean_smr CSV
  std::filesystem::path predictions_path;   // image,qp,predicted_smr CSV
  std::filesystem::path tables_path;        // ground-truth tables CSV
  bool constant_qp = false;                 // baseline arm: force q_b
  std::string label;
};

struct BdRateArgs {
  std::filesystem::path anchor_path;
  std::filesystem::path test_path;
  bool piecewise = false;
};

struct ReportArgs {
  std::vector<int> subset_sizes;
  int repetitions = 3;
};

struct PipelineArgs {
  TrainArgs train;
};

// Each runner returns the process exit code (0 on success) and reports
// progress on stdout. Failures throw; main() converts them to exit 1.
int run_ingest(const RunConfig& config);
int run_annotate(const RunConfig& config);
int run_diversity(const RunConfig& config, const DiversityArgs& args);
int run_jnd(const RunConfig& config, const JndArgs& args);
int run_correlate(const RunConfig& config, const std::string& extractor,
                  const std::filesystem::path& tables_path = {});
int run_train(const RunConfig& config, const TrainArgs& args);
int run_predict(const RunConfig& config, const PredictArgs& args);
int run_optimize(const RunConfig& config, const OptimizeArgs& args);
int run_bdrate(const RunConfig& config, const BdRateArgs& args);
int run_report(const RunConfig& config, const ReportArgs& args);
int run_pipeline(const RunConfig& config, const PipelineArgs& args);

// Predictions CSV interchange: image,qp,predicted_smr.
std::string predictions_to_csv(const PredictionMap& predictions);
PredictionMap predictions_from_csv(const std::string& text);

}  // namespace smrkit::cli
