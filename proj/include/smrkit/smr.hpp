#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smrkit/records.hpp"
#include "smrkit/satisfaction.hpp"
#include "smrkit/types.hpp"

namespace smrkit {

// One configured SMR flavor. Classification types are keyed by the top-k
// depth (and an optional machine-library tag); detection types by the IOU
// grid fed to mAP and the satisfaction threshold applied in the ratio.
struct ClassificationSmrType {
  int k = 1;  // one of 1, 3, 5
  std::string library;  // optional tag, e.g. "v1"

  bool operator==(const ClassificationSmrType&) const = default;
};

struct DetectionSmrType {
  std::vector<double> iou_grid;  // strictly increasing, in (0, 1]
  double t_s = 0.5;              // in (0, 1]

  bool operator==(const DetectionSmrType&) const = default;
};

class SmrType {
 public:
  SmrType() : spec_(ClassificationSmrType{}) {}
  explicit SmrType(ClassificationSmrType cls);
  explicit SmrType(DetectionSmrType det);

  static SmrType top_k(int k, std::string library = "");
  static SmrType detection(double t_s,
                           std::vector<double> iou_grid =
                               DetectionScoringConfig::default_iou_grid());

  // Text forms: "top1", "top5@v1", "det:0.5", "det:0.5:0.6",
  // "det:0.5:0.5-0.95-0.05".
  static SmrType parse(const std::string& text);
  std::string name() const;
  // name() with filesystem-hostile characters replaced.
  std::string file_tag() const;

  Task task() const;
  const ClassificationSmrType& classification() const;
  const DetectionSmrType& detection_spec() const;

  // Satisfaction threshold applied in the machine-count ratio. Binary
  // classification scores are satisfied only at exactly 1, so the
  // effective threshold is 1.0 there.
  double effective_threshold() const;

  bool operator==(const SmrType&) const = default;

 private:
  std::variant<ClassificationSmrType, DetectionSmrType> spec_;
};

struct SmrEntry {
  double smr = 0;
  int machine_count = 0;
};

// Per-image SMR across the ladder (ORIGINAL included) for one SMR type.
struct SmrTable {
  std::string image;
  std::string smr_type;
  std::map<QualityLevel, SmrEntry> entries;
  // Detection only: some machine's pseudo ground truth was empty, so its
  // scores entered as vacuous 1.0.
  bool vacuous = false;

  const SmrEntry& at(QualityLevel level) const;
};

// Per-level mean SMR over an image set.
struct SmrDistribution {
  std::string smr_type;
  std::map<QualityLevel, double> mean_smr;

  double at(QualityLevel level) const;
};

// Core SMR aggregation: the fraction of machines whose satisfaction score
// meets the threshold.
double smr(const std::vector<SatisfactionScore>& scores, double t_s);

struct AnnotateOptions {
  // Strict mode fails on any missing (machine, image, level) cell. Lenient
  // mode aggregates over the machines present at both the level and
  // ORIGINAL, recording the count per entry.
  bool strict = true;
  // Detection only: drop images whose pseudo ground truth is empty for some
  // machine instead of counting those scores as vacuous 1.0.
  bool exclude_vacuous = false;
  int workers = 1;
};

// Ground-truth SMR tables for every manifest image across the full ladder,
// ORIGINAL included. Deterministic and independent of record input order
// and worker count.
std::vector<SmrTable> annotate(const DatasetManifest& manifest,
                               const PerceptionSet& records,
                               const SmrType& type,
                               const AnnotateOptions& options = {});

SmrDistribution distribution(const std::vector<SmrTable>& tables);

// Machine-subset consistency study: MAE between SMR recomputed from a random
// n_m-machine subset and the full-library SMR, averaged over repetitions.
// Only coded levels enter the MAE; ORIGINAL is 1.0 under any subset.
struct SubsetConsistencyResult {
  int n_m = 0;
  int repetitions = 0;
  double mean_mae = 0;
  std::vector<double> per_repetition;
};

SubsetConsistencyResult subset_consistency(const DatasetManifest& manifest,
                                           const PerceptionSet& records,
                                           const SmrType& type, int n_m,
                                           int repetitions, std::uint64_t seed,
                                           const AnnotateOptions& options = {});

struct OrderingViolation {
  std::string image;
  QualityLevel level;
  double smaller_k_smr = 0;
  double larger_k_smr = 0;
};

// Checks SMR-top1 <= SMR-top3 <= SMR-top5 (any ascending-k sequence) per
// (image, level). Table groups must be aligned on images and levels.
std::vector<OrderingViolation> ordering_check(
    const std::vector<std::vector<SmrTable>>& tables_by_ascending_k);

// --- Table / distribution interchange ---------------------------------------

// CSV rows: image,smr_type,qp,smr,machine_count
std::string tables_to_csv(const std::vector<SmrTable>& tables);
std::vector<SmrTable> tables_from_csv(const std::string& text);
std::string tables_to_jsonl(const std::vector<SmrTable>& tables);

// CSV rows: qp,mean_smr
std::string distribution_to_csv(const SmrDistribution& dist);
SmrDistribution distribution_from_csv(const std::string& text,
                                      const std::string& smr_type = "");

}  // namespace smrkit
