#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smrkit/records.hpp"
#include "smrkit/satisfaction.hpp"
#include "smrkit/types.hpp"

namespace smrkit {

// Binary perception-consistency labels for one machine and image over the
// coded ladder (ORIGINAL excluded), in degradation order.
struct ConsistencySequence {
  std::string machine;
  std::string image;
  std::vector<int> labels;
};

struct DiversityMatrix {
  std::vector<std::string> machines;
  // Symmetric with zero diagonal; entry = mean Hamming distance of the two
  // machines' consistency sequences over the sampled images.
  std::vector<std::vector<double>> mean_distance;
  double overall_mean = 0;  // mean over unordered machine pairs
  std::size_t ladder_size = 0;

  double percent_differing() const;
};

struct JndReport {
  std::string machine;
  std::string image;
  std::optional<QualityLevel> first_jnd;
  // Every level meeting the JND condition; the profile may be
  // non-monotonic, so levels after the first JND can be absent here.
  std::vector<QualityLevel> violations;
};

// Binary label sequence over the coded ladder: classification labels
// compare top-1 categories against ORIGINAL; detection labels (extension)
// threshold the detection satisfaction score at t_s.
ConsistencySequence consistency_sequence(
    const PerceptionSet& records, const std::string& machine,
    const std::string& image, const QpLadder& ladder, Task task,
    double t_s = 0.5,
    const DetectionScoringConfig& config = DetectionScoringConfig::defaults());

// Hamming distance between two same-image, same-length label sequences.
int diversity_score(const ConsistencySequence& a, const ConsistencySequence& b);

// The fraction reported alongside an overall diversity mean: mean Hamming
// distance as a percentage of the ladder length.
double diversity_percent(double overall_mean, std::size_t ladder_size);

struct DiversityOptions {
  std::size_t sample_size = 0;  // 0 = all manifest images
  int repetitions = 1;
  std::uint64_t seed = 0;
  double t_s = 0.5;  // detection labels only
  int workers = 1;
};

// Pairwise mean diversity over sampled images, averaged over repetitions.
// Each repetition redraws its image sample from a named substream.
DiversityMatrix diversity_matrix(const DatasetManifest& manifest,
                                 const PerceptionSet& records,
                                 const DiversityOptions& options = {});

// Non-ideal codec-modification classifier: given a machine pair's
// consistency labels at the base and modified QP, a modification is
// non-ideal when it degrades one machine while the other improves or holds,
// or when it helps one machine while the other stays inconsistent.
bool non_ideal_modification(int l_m_base, int l_m_mod, int l_n_base,
                            int l_n_mod);

struct ModificationExperimentConfig {
  int trials = 10000;
  int delta_min = 1;
  int delta_max = 5;
  std::uint64_t seed = 0;
  // Non-paper extension: label detection records by thresholding the
  // satisfaction score at t_s instead of top-1 agreement.
  double t_s = 0.5;
  int redraw_limit = 100;
};

struct ModificationExperimentResult {
  int trials = 0;
  int non_ideal = 0;
  double non_ideal_fraction = 0;
};

// Random codec-modification experiment: per trial, draw an image, a machine
// pair, a base QP and a signed delta in [delta_min, delta_max]; the
// modified QP is clamped to the ladder range and re-drawn while it
// collides with the base or falls off the ladder. Per-trial substreams make
// the result schedule-independent.
ModificationExperimentResult modification_experiment(
    const DatasetManifest& manifest, const PerceptionSet& records,
    const ModificationExperimentConfig& config);

// First level meeting the JND condition plus the full violating set.
// Classification JND: score == 0; detection JND: score < t_s. Scores must
// cover the coded ladder in degradation order.
JndReport locate_jnd(const std::string& machine, const std::string& image,
                     const std::vector<std::pair<QualityLevel, double>>& scores,
                     Task task, double t_s);

// JND reports for every (machine, image) pair in the manifest.
std::vector<JndReport> jnd_reports(
    const DatasetManifest& manifest, const PerceptionSet& records, double t_s,
    const DetectionScoringConfig& config = DetectionScoringConfig::defaults(),
    int workers = 1);

// --- Interchange -------------------------------------------------------------

std::string diversity_matrix_to_csv(const DiversityMatrix& matrix);
std::string jnd_reports_to_jsonl(const std::vector<JndReport>& reports);
std::string experiment_summary_to_json(const ModificationExperimentResult& r);

}  // namespace smrkit
