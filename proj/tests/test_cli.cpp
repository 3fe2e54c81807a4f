#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "smrkit/cli.hpp"
#include "smrkit/io.hpp"
#include "smrkit/records.hpp"

using namespace smrkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Hand-written fixture: 2 machines, 2 images, levels {ORIGINAL, 32, 51}.
// img1: both machines hold at 32; m2 drifts to category 9 at 51.
// img2: m1 drifts to the original's rank-2 category at 32 and recovers at 51;
//       m2 holds everywhere.
void write_tiny_dataset(const fs::path& dir) {
  const std::string manifest = R"({
  "task": "classification",
  "ladder": [32, 51],
  "machines": ["m1", "m2"],
  "images": ["img1", "img2"]
})";
  write_file_atomic(dir / "manifest.json", manifest + "\n");
  const std::string records =
      R"({"machine":"m1","image":"img1","qp":0,"topk":[1,2,3]})"
      "\n"
      R"({"machine":"m2","image":"img1","qp":0,"topk":[1,2,3]})"
      "\n"
      R"({"machine":"m1","image":"img1","qp":32,"topk":[1,5,6]})"
      "\n"
      R"({"machine":"m2","image":"img1","qp":32,"topk":[1,9,8]})"
      "\n"
      R"({"machine":"m1","image":"img1","qp":51,"topk":[1,5,6]})"
      "\n"
      R"({"machine":"m2","image":"img1","qp":51,"topk":[9,1,2]})"
      "\n"
      R"({"machine":"m1","image":"img2","qp":0,"topk":[4,5,6]})"
      "\n"
      R"({"machine":"m2","image":"img2","qp":0,"topk":[4,5,6]})"
      "\n"
      R"({"machine":"m1","image":"img2","qp":32,"topk":[5,4,6]})"
      "\n"
      R"({"machine":"m2","image":"img2","qp":32,"topk":[4,6,5]})"
      "\n"
      R"({"machine":"m1","image":"img2","qp":51,"topk":[4,5,6]})"
      "\n"
      R"({"machine":"m2","image":"img2","qp":51,"topk":[4,5,6]})"
      "\n";
  write_file_atomic(dir / "records.jsonl", records);
}

cli::RunConfig tiny_config(const fs::path& dir, const fs::path& out) {
  cli::RunConfig config;
  config.manifest_path = dir / "manifest.json";
  config.record_paths = {dir / "records.jsonl"};
  config.out_dir = out;
  config.seed = 11;
  return config;
}

void write_fixture_dataset(const fs::path& dir,
                           const fixtures::ClassificationFixture& fx) {
  write_file_atomic(dir / "manifest.json", manifest_to_json(fx.manifest));
  write_file_atomic(dir / "records.jsonl", perceptions_to_jsonl(fx.records));
  write_file_atomic(dir / "features.jsonl", features_to_jsonl(fx.features));
  write_file_atomic(dir / "bitrates.csv", bitrates_to_csv(fx.bitrates));
}

}  // namespace

TEST_CASE("cmd_annotate matches the hand-computed golden CSV") {
  TempDir dir("smrkit_cli_golden");
  write_tiny_dataset(dir.path);
  const cli::RunConfig config = tiny_config(dir.path, dir.path / "out");
  CHECK(cli::run_annotate(config) == 0);

  // Hand aggregation, k = 1:
  //   img1: ORIGINAL 1.0; qp32 both hold -> 1.0; qp51 m2 drifts -> 0.5
  //   img2: ORIGINAL 1.0; qp32 m1 drifts -> 0.5; qp51 both hold -> 1.0
  const std::string expected =
      "image,smr_type,qp,smr,machine_count\n"
      "img1,top1,0,1,2\n"
      "img1,top1,32,1,2\n"
      "img1,top1,51,0.5,2\n"
      "img2,top1,0,1,2\n"
      "img2,top1,32,0.5,2\n"
      "img2,top1,51,1,2\n";
  CHECK(read_file(dir.path / "out" / "tables_top1.csv") == expected);

  // And under k = 3 the img2 drift (5 is in the original's top-3) heals.
  cli::RunConfig top3 = config;
  top3.smr_types = {"top3"};
  top3.out_dir = dir.path / "out3";
  CHECK(cli::run_annotate(top3) == 0);
  const std::string expected3 =
      "image,smr_type,qp,smr,machine_count\n"
      "img1,top3,0,1,2\n"
      "img1,top3,32,1,2\n"
      "img1,top3,51,0.5,2\n"
      "img2,top3,0,1,2\n"
      "img2,top3,32,1,2\n"
      "img2,top3,51,1,2\n";
  CHECK(read_file(dir.path / "out3" / "tables_top3.csv") == expected3);
}

TEST_CASE("strict mode aborts naming the missing cell") {
  TempDir dir("smrkit_cli_strict");
  write_tiny_dataset(dir.path);
  // Drop one line.
  std::string records = read_file(dir.path / "records.jsonl");
  const std::string victim =
      R"({"machine":"m2","image":"img2","qp":51,"topk":[4,5,6]})"
      "\n";
  const std::size_t pos = records.find(victim);
  REQUIRE(pos != std::string::npos);
  records.erase(pos, victim.size());
  write_file_atomic(dir.path / "records.jsonl", records);

  const cli::RunConfig config = tiny_config(dir.path, dir.path / "out");
  CHECK_THROWS_WITH_AS(cli::run_annotate(config),
                       doctest::Contains("(m2, img2, qp 51)"),
                       std::runtime_error);

  cli::RunConfig lenient = config;
  lenient.strict = false;
  CHECK(cli::run_annotate(lenient) == 0);
  const std::string csv = read_file(dir.path / "out" / "tables_top1.csv");
  CHECK(csv.find("img2,top1,51,1,1") != std::string::npos);
}

TEST_CASE("rerun with the same seed and config is byte-identical") {
  TempDir dir("smrkit_cli_rerun");
  const auto fx = fixtures::make_classification_fixture({.machines = 6,
                                                         .images = 40,
                                                         .qp_lo = 32,
                                                         .qp_hi = 51,
                                                         .seed = 2024,
                                                         .direction_spread = 0.05});
  write_fixture_dataset(dir.path, fx);

  auto run_once = [&](const fs::path& out, int workers) {
    cli::RunConfig config = tiny_config(dir.path, out);
    config.feature_paths = {dir.path / "features.jsonl"};
    config.bitrate_paths = {dir.path / "bitrates.csv"};
    config.thresholds = "0.6:0.05:0.9";
    config.workers = workers;
    cli::PipelineArgs args;
    args.train.learning_rate = 5e-3;
    args.train.epochs = 40;
    args.train.batch_size = 32;
    CHECK(cli::run_pipeline(config, args) == 0);
  };
  run_once(dir.path / "out_a", 1);
  run_once(dir.path / "out_b", 3);

  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dir.path / "out_a")) {
    const fs::path other = dir.path / "out_b" / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(read_file(entry.path()) == read_file(other));
    ++compared;
  }
  CHECK(compared >= 12);
}

TEST_CASE("seed change alters stochastic stages but not annotation") {
  TempDir dir("smrkit_cli_seed");
  const auto fx = fixtures::make_classification_fixture({.machines = 5,
                                                         .images = 30,
                                                         .qp_lo = 32,
                                                         .qp_hi = 51,
                                                         .seed = 7,
                                                         .direction_spread = 0.05});
  write_fixture_dataset(dir.path, fx);

  auto run_once = [&](const fs::path& out, std::uint64_t seed) {
    cli::RunConfig config = tiny_config(dir.path, out);
    config.feature_paths = {dir.path / "features.jsonl"};
    config.bitrate_paths = {dir.path / "bitrates.csv"};
    config.thresholds = "0.5:0.05:0.9";
    config.seed = seed;
    cli::PipelineArgs args;
    args.train.learning_rate = 5e-3;
    args.train.epochs = 25;
    CHECK(cli::run_pipeline(config, args) == 0);
  };
  run_once(dir.path / "out_s1", 1);
  run_once(dir.path / "out_s2", 2);

  CHECK(read_file(dir.path / "out_s1" / "tables_top1.csv") ==
        read_file(dir.path / "out_s2" / "tables_top1.csv"));
  CHECK(read_file(dir.path / "out_s1" / "distribution_top1.csv") ==
        read_file(dir.path / "out_s2" / "distribution_top1.csv"));
  CHECK(read_file(dir.path / "out_s1" / "curve_constant-qp.csv") ==
        read_file(dir.path / "out_s2" / "curve_constant-qp.csv"));
  CHECK(read_file(dir.path / "out_s1" / "curve_gt-guided.csv") ==
        read_file(dir.path / "out_s2" / "curve_gt-guided.csv"));
  CHECK(read_file(dir.path / "out_s1" / "model_baseline.json") !=
        read_file(dir.path / "out_s2" / "model_baseline.json"));
}

TEST_CASE("pipeline aborts naming the failing stage") {
  TempDir dir("smrkit_cli_stage");
  write_tiny_dataset(dir.path);
  cli::RunConfig config = tiny_config(dir.path, dir.path / "out");
  // No features/bitrates supplied: the ingest stage must say so.
  CHECK_THROWS_WITH_AS(cli::run_pipeline(config, cli::PipelineArgs{}),
                       doctest::Contains("stage ingest"), std::runtime_error);
}

TEST_CASE("detection dataset flows through annotate with det types") {
  TempDir dir("smrkit_cli_det");
  const std::string manifest = R"({
  "task": "detection",
  "ladder": [32, 40],
  "machines": ["m1", "m2"],
  "images": ["i1"]
})";
  write_file_atomic(dir.path / "manifest.json", manifest + "\n");
  // m1 keeps its box at 32 and loses it at 40; m2 keeps it everywhere.
  auto line = [](const std::string& m, int qp, bool hit) {
    std::string dets = hit
        ? R"([{"bbox":[0,0,10,10],"cat":1,"conf":0.9}])"
        : R"([{"bbox":[60,60,4,4],"cat":1,"conf":0.9}])";
    return "{\"machine\":\"" + m + "\",\"image\":\"i1\",\"qp\":" +
           std::to_string(qp) + ",\"dets\":" + dets + "}\n";
  };
  std::string records;
  records += line("m1", 0, true);
  records += line("m2", 0, true);
  records += line("m1", 32, true);
  records += line("m2", 32, true);
  records += line("m1", 40, false);
  records += line("m2", 40, true);
  write_file_atomic(dir.path / "records.jsonl", records);

  cli::RunConfig config = tiny_config(dir.path, dir.path / "out");
  config.smr_types = {"det:0.5", "det:0.75:0.5"};
  CHECK(cli::run_annotate(config) == 0);
  const std::string csv = read_file(dir.path / "out" / "tables_det_0.5.csv");
  CHECK(csv.find("i1,det:0.5,0,1,2") != std::string::npos);
  CHECK(csv.find("i1,det:0.5,32,1,2") != std::string::npos);
  CHECK(csv.find("i1,det:0.5,40,0.5,2") != std::string::npos);
  CHECK(fs::exists(dir.path / "out" / "tables_det_0.75_0.5.csv"));
  CHECK(fs::exists(dir.path / "out" / "tables_det_0.5.jsonl"));
}

TEST_CASE("ingest command reports counts and completeness") {
  TempDir dir("smrkit_cli_ingest");
  write_tiny_dataset(dir.path);
  const cli::RunConfig config = tiny_config(dir.path, dir.path / "out");
  CHECK(cli::run_ingest(config) == 0);
}

TEST_CASE("diversity, jnd, correlate, and report commands produce outputs") {
  TempDir dir("smrkit_cli_misc");
  const auto fx = fixtures::make_classification_fixture({.machines = 6,
                                                         .images = 10,
                                                         .qp_lo = 32,
                                                         .qp_hi = 41,
                                                         .seed = 55,
                                                         .direction_spread = 0.05,
                                                         .with_bitrates = false});
  write_fixture_dataset(dir.path, fx);

  cli::RunConfig config = tiny_config(dir.path, dir.path / "out");
  config.feature_paths = {dir.path / "features.jsonl"};

  cli::DiversityArgs diversity;
  diversity.repetitions = 2;
  diversity.modification_trials = 200;
  CHECK(cli::run_diversity(config, diversity) == 0);
  CHECK(fs::exists(dir.path / "out" / "diversity_matrix.csv"));
  CHECK(fs::exists(dir.path / "out" / "diversity_summary.json"));
  CHECK(fs::exists(dir.path / "out" / "modification_experiment.json"));

  CHECK(cli::run_jnd(config, cli::JndArgs{}) == 0);
  CHECK(fs::exists(dir.path / "out" / "jnd_reports.jsonl"));

  CHECK(cli::run_correlate(config, "enc") == 0);
  CHECK(fs::exists(dir.path / "out" / "correlation.csv"));
  CHECK(fs::exists(dir.path / "out" / "correlation_summary.json"));

  cli::ReportArgs report;
  report.subset_sizes = {3, 6};
  report.repetitions = 2;
  CHECK(cli::run_report(config, report) == 0);
  const std::string report_json = read_file(dir.path / "out" / "report.json");
  CHECK(report_json.find("\"ordering_violations\": 0") != std::string::npos);
  const std::string mae_csv = read_file(dir.path / "out" / "subset_mae.csv");
  CHECK(mae_csv.find("6,2,0\n") != std::string::npos);  // full set: MAE 0
}

TEST_CASE("train/predict/optimize/bdrate file-level flow") {
  TempDir dir("smrkit_cli_flow");
  const auto fx = fixtures::make_classification_fixture({.machines = 8,
                                                         .images = 30,
                                                         .qp_lo = 32,
                                                         .qp_hi = 47,
                                                         .seed = 99,
                                                         .direction_spread = 0.05});
  write_fixture_dataset(dir.path, fx);

  cli::RunConfig config = tiny_config(dir.path, dir.path / "out");
  config.feature_paths = {dir.path / "features.jsonl"};
  config.bitrate_paths = {dir.path / "bitrates.csv"};
  config.thresholds = "0.6:0.05:0.9";

  CHECK(cli::run_annotate(config) == 0);

  cli::TrainArgs train;
  train.learning_rate = 5e-3;
  train.epochs = 60;
  train.tables_path = dir.path / "out" / "tables_top1.csv";
  CHECK(cli::run_train(config, train) == 0);

  cli::PredictArgs predict;
  predict.model_path = dir.path / "out" / "model_baseline.json";
  CHECK(cli::run_predict(config, predict) == 0);

  cli::OptimizeArgs constant;
  constant.distribution_path = dir.path / "out" / "distribution_top1.csv";
  constant.tables_path = dir.path / "out" / "tables_top1.csv";
  constant.constant_qp = true;
  CHECK(cli::run_optimize(config, constant) == 0);

  cli::OptimizeArgs guided;
  guided.distribution_path = dir.path / "out" / "distribution_top1.csv";
  guided.predictions_path = dir.path / "out" / "predictions.csv";
  guided.tables_path = dir.path / "out" / "tables_top1.csv";
  CHECK(cli::run_optimize(config, guided) == 0);

  cli::BdRateArgs bdrate;
  bdrate.anchor_path = dir.path / "out" / "curve_constant-qp.csv";
  bdrate.test_path = dir.path / "out" / "curve_guided.csv";
  CHECK(cli::run_bdrate(config, bdrate) == 0);
  const std::string report = read_file(dir.path / "out" / "bdrate.json");
  CHECK(report.find("bd_rate_percent") != std::string::npos);
}

#ifdef SMRKIT_BIN
TEST_CASE("binary smoke test: annotate subcommand and error exit code") {
  TempDir dir("smrkit_cli_bin");
  write_tiny_dataset(dir.path);
  const std::string base = std::string(SMRKIT_BIN) + " annotate --manifest " +
                           (dir.path / "manifest.json").string() +
                           " --records " +
                           (dir.path / "records.jsonl").string() + " --out " +
                           (dir.path / "out").string();
  CHECK(std::system((base + " > /dev/null 2>&1").c_str()) == 0);
  CHECK(fs::exists(dir.path / "out" / "tables_top1.csv"));

  // Unknown SMR type must exit nonzero.
  const int bad = std::system(
      (base + " --smr-type top9 > /dev/null 2>&1").c_str());
  CHECK(bad != 0);
}
#endif
