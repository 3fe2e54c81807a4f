#include "smrkit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smrkit/io.hpp"
#include "smrkit/parallel.hpp"
#include "smrkit/rng.hpp"

namespace smrkit {

double DiversityMatrix::percent_differing() const {
  return diversity_percent(overall_mean, ladder_size);
}

double diversity_percent(double overall_mean, std::size_t ladder_size) {
  if (ladder_size == 0) {
    throw std::runtime_error("ladder size must be positive");
  }
  return 100.0 * overall_mean / static_cast<double>(ladder_size);
}

namespace {

int consistency_label(const PerceptionRecord& at_level,
                      const PerceptionRecord& at_original, Task task,
                      double t_s, const DetectionScoringConfig& config) {
  if (task == Task::kClassification) {
    return at_level.classification().top1() ==
                   at_original.classification().top1()
               ? 1
               : 0;
  }
  const SatisfactionScore s =
      score_detection(at_level.detections(), at_original.detections(), config);
  return s.value >= t_s ? 1 : 0;
}

}  // namespace

ConsistencySequence consistency_sequence(const PerceptionSet& records,
                                         const std::string& machine,
                                         const std::string& image,
                                         const QpLadder& ladder, Task task,
                                         double t_s,
                                         const DetectionScoringConfig& config) {
  if (ladder.empty()) {
    throw std::runtime_error("consistency sequence requires a nonempty ladder");
  }
  const PerceptionRecord& original =
      records.at(machine, image, QualityLevel::original());
  ConsistencySequence seq;
  seq.machine = machine;
  seq.image = image;
  seq.labels.reserve(ladder.size());
  for (QualityLevel level : ladder.coded()) {
    const PerceptionRecord& rec = records.at(machine, image, level);
    seq.labels.push_back(consistency_label(rec, original, task, t_s, config));
  }
  return seq;
}

int diversity_score(const ConsistencySequence& a, const ConsistencySequence& b) {
  if (a.labels.size() != b.labels.size()) {
    throw std::runtime_error("diversity score requires equal-length sequences");
  }
  if (a.image != b.image) {
    throw std::runtime_error("diversity score compares sequences of one image");
  }
  int distance = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    distance += a.labels[i] != b.labels[i] ? 1 : 0;
  }
  return distance;
}

DiversityMatrix diversity_matrix(const DatasetManifest& manifest,
                                 const PerceptionSet& records,
                                 const DiversityOptions& options) {
  manifest.validate();
  if (manifest.images.empty()) {
    throw std::runtime_error("diversity study requires at least one image");
  }
  if (options.repetitions < 1) {
    throw std::runtime_error("repetitions must be >= 1");
  }
  const std::size_t n_machines = manifest.machines.size();
  const std::size_t n_images = manifest.images.size();
  const std::size_t sample =
      options.sample_size == 0 ? n_images
                               : std::min(options.sample_size, n_images);

  DiversityMatrix matrix;
  matrix.machines = manifest.machines;
  matrix.ladder_size = manifest.ladder.size();
  matrix.mean_distance.assign(n_machines, std::vector<double>(n_machines, 0.0));

  const DetectionScoringConfig config = DetectionScoringConfig::defaults();
  for (int rep = 0; rep < options.repetitions; ++rep) {
    RandomStream stream(options.seed, "diversity/rep/" + std::to_string(rep));
    const std::vector<std::size_t> image_idx =
        stream.sample_without_replacement(n_images, sample);

    // Sequences for this repetition's sample, machine-major.
    std::vector<std::vector<ConsistencySequence>> seqs(n_machines);
    parallel_for(n_machines, options.workers, [&](std::size_t mi) {
      seqs[mi].reserve(image_idx.size());
      for (std::size_t ii : image_idx) {
        seqs[mi].push_back(consistency_sequence(
            records, manifest.machines[mi], manifest.images[ii],
            manifest.ladder, manifest.task, options.t_s, config));
      }
    });

    for (std::size_t a = 0; a < n_machines; ++a) {
      for (std::size_t b = a + 1; b < n_machines; ++b) {
        long long total = 0;
        for (std::size_t s = 0; s < image_idx.size(); ++s) {
          total += diversity_score(seqs[a][s], seqs[b][s]);
        }
        const double mean =
            static_cast<double>(total) / static_cast<double>(image_idx.size());
        matrix.mean_distance[a][b] += mean;
        matrix.mean_distance[b][a] += mean;
      }
    }
  }

  double pair_sum = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < n_machines; ++a) {
    for (std::size_t b = a + 1; b < n_machines; ++b) {
      matrix.mean_distance[a][b] /= options.repetitions;
      matrix.mean_distance[b][a] /= options.repetitions;
      pair_sum += matrix.mean_distance[a][b];
      ++pairs;
    }
  }
  matrix.overall_mean = pairs == 0 ? 0.0 : pair_sum / static_cast<double>(pairs);
  return matrix;
}

bool non_ideal_modification(int l_m_base, int l_m_mod, int l_n_base,
                            int l_n_mod) {
  const int delta_m = l_m_mod - l_m_base;
  const int delta_n = l_n_mod - l_n_base;
  if (delta_m == delta_n) return false;
  // Degradation clause: one machine deteriorates while the other improves
  // or holds.
  if (delta_m == -1 || delta_n == -1) return true;
  // Ineffective clause: one machine improves while the other stays
  // inconsistent.
  const bool m_stuck = l_m_base == 0 && l_m_mod == 0;
  const bool n_stuck = l_n_base == 0 && l_n_mod == 0;
  return m_stuck || n_stuck;
}

ModificationExperimentResult modification_experiment(
    const DatasetManifest& manifest, const PerceptionSet& records,
    const ModificationExperimentConfig& config) {
  manifest.validate();
  if (config.trials < 1) {
    throw std::runtime_error("experiment requires trials >= 1");
  }
  if (manifest.machines.size() < 2) {
    throw std::runtime_error("experiment requires at least two machines");
  }
  if (config.delta_min < 1 || config.delta_max < config.delta_min) {
    throw std::runtime_error("delta range must satisfy 1 <= min <= max");
  }
  const QpLadder& ladder = manifest.ladder;
  const int lo = ladder.min_qp();
  const int hi = ladder.max_qp();
  const DetectionScoringConfig det_config = DetectionScoringConfig::defaults();

  auto label_at = [&](const std::string& machine, const std::string& image,
                      QualityLevel level) {
    const PerceptionRecord& rec = records.at(machine, image, level);
    const PerceptionRecord& original =
        records.at(machine, image, QualityLevel::original());
    return consistency_label(rec, original, manifest.task, config.t_s,
                             det_config);
  };

  ModificationExperimentResult result;
  result.trials = config.trials;
  for (int trial = 0; trial < config.trials; ++trial) {
    RandomStream stream(config.seed, "modexp/trial/" + std::to_string(trial));
    const std::string& image =
        manifest.images[stream.uniform_index(manifest.images.size())];
    const std::size_t m_idx = stream.uniform_index(manifest.machines.size());
    std::size_t n_idx = stream.uniform_index(manifest.machines.size() - 1);
    if (n_idx >= m_idx) ++n_idx;
    const std::string& machine_m = manifest.machines[m_idx];
    const std::string& machine_n = manifest.machines[n_idx];

    const QualityLevel base =
        ladder.coded()[stream.uniform_index(ladder.size())];

    QualityLevel mod = base;
    bool found = false;
    for (int attempt = 0; attempt < config.redraw_limit; ++attempt) {
      const int span = config.delta_max - config.delta_min + 1;
      const int delta = config.delta_min +
                        static_cast<int>(stream.uniform_u64(
                            static_cast<std::uint64_t>(span)));
      const int sign = stream.bernoulli(0.5) ? 1 : -1;
      const int qp_mod = std::clamp(base.qp() + sign * delta, lo, hi);
      if (qp_mod == base.qp()) continue;
      const QualityLevel candidate = QualityLevel::coded(qp_mod);
      if (!ladder.contains(candidate)) continue;
      mod = candidate;
      found = true;
      break;
    }
    if (!found) {
      throw std::runtime_error(
          "trial " + std::to_string(trial) +
          ": ladder cannot produce a distinct modified QP near qp " +
          std::to_string(base.qp()));
    }

    const int l_m_base = label_at(machine_m, image, base);
    const int l_m_mod = label_at(machine_m, image, mod);
    const int l_n_base = label_at(machine_n, image, base);
    const int l_n_mod = label_at(machine_n, image, mod);
    if (non_ideal_modification(l_m_base, l_m_mod, l_n_base, l_n_mod)) {
      ++result.non_ideal;
    }
  }
  result.non_ideal_fraction =
      static_cast<double>(result.non_ideal) / static_cast<double>(result.trials);
  return result;
}

JndReport locate_jnd(const std::string& machine, const std::string& image,
                     const std::vector<std::pair<QualityLevel, double>>& scores,
                     Task task, double t_s) {
  JndReport report;
  report.machine = machine;
  report.image = image;
  for (const auto& [level, score] : scores) {
    const bool violating =
        task == Task::kClassification ? score == 0.0 : score < t_s;
    if (violating) {
      if (!report.first_jnd.has_value()) report.first_jnd = level;
      report.violations.push_back(level);
    }
  }
  return report;
}

std::vector<JndReport> jnd_reports(const DatasetManifest& manifest,
                                   const PerceptionSet& records, double t_s,
                                   const DetectionScoringConfig& config,
                                   int workers) {
  manifest.validate();
  std::vector<JndReport> reports(manifest.machines.size() *
                                 manifest.images.size());
  parallel_for(reports.size(), workers, [&](std::size_t idx) {
    const std::string& machine = manifest.machines[idx / manifest.images.size()];
    const std::string& image = manifest.images[idx % manifest.images.size()];
    const PerceptionRecord& original =
        records.at(machine, image, QualityLevel::original());
    std::vector<std::pair<QualityLevel, double>> scores;
    scores.reserve(manifest.ladder.size());
    for (QualityLevel level : manifest.ladder.coded()) {
      const PerceptionRecord& rec = records.at(machine, image, level);
      double value = 0;
      if (manifest.task == Task::kClassification) {
        value = score_classification(rec.classification(),
                                     original.classification(), 1)
                    .value;
      } else {
        value = score_detection(rec.detections(), original.detections(), config)
                    .value;
      }
      scores.emplace_back(level, value);
    }
    reports[idx] = locate_jnd(machine, image, scores, manifest.task, t_s);
  });
  return reports;
}

std::string diversity_matrix_to_csv(const DiversityMatrix& matrix) {
  std::string out = "machine";
  for (const auto& m : matrix.machines) {
    out += ',';
    out += m;
  }
  out += '\n';
  for (std::size_t a = 0; a < matrix.machines.size(); ++a) {
    out += matrix.machines[a];
    for (std::size_t b = 0; b < matrix.machines.size(); ++b) {
      out += ',';
      out += format_num(matrix.mean_distance[a][b]);
    }
    out += '\n';
  }
  return out;
}

std::string jnd_reports_to_jsonl(const std::vector<JndReport>& reports) {
  std::string out;
  for (const JndReport& r : reports) {
    out += "{\"machine\":\"" + r.machine + "\",\"image\":\"" + r.image +
           "\",\"first_jnd\":";
    out += r.first_jnd.has_value() ? std::to_string(r.first_jnd->qp()) : "null";
    out += ",\"violations\":[";
    for (std::size_t i = 0; i < r.violations.size(); ++i) {
      if (i > 0) out += ',';
      out += std::to_string(r.violations[i].qp());
    }
    out += "]}\n";
  }
  return out;
}

std::string experiment_summary_to_json(const ModificationExperimentResult& r) {
  return "{\"trials\":" + std::to_string(r.trials) +
         ",\"non_ideal\":" + std::to_string(r.non_ideal) +
         ",\"non_ideal_fraction\":" + format_num(r.non_ideal_fraction) + "}\n";
}

}  // namespace smrkit
