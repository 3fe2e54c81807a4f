#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "smrkit/types.hpp"

namespace smrkit {

// Immutable, index-backed collections. Ingestion validates every type
// invariant up front; afterwards the collections are safe for concurrent
// reads. Lookups are keyed by (owner id, image id, qp) with set semantics,
// so ingestion order and shard layout never change the result.

class PerceptionSet {
 public:
  void add(PerceptionRecord rec);  // rejects duplicate (machine,image,level)

  const PerceptionRecord* find(const std::string& machine,
                               const std::string& image,
                               QualityLevel level) const;
  const PerceptionRecord& at(const std::string& machine,
                             const std::string& image,
                             QualityLevel level) const;

  const std::vector<PerceptionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<PerceptionRecord> records_;
  std::map<std::tuple<std::string, std::string, int>, std::size_t> index_;
};

class FeatureSet {
 public:
  void add(FeatureRecord rec);  // enforces uniform dimension per extractor

  const FeatureRecord* find(const std::string& extractor,
                            const std::string& image,
                            QualityLevel level) const;
  const FeatureRecord& at(const std::string& extractor,
                          const std::string& image,
                          QualityLevel level) const;

  std::vector<std::string> extractors() const;
  std::size_t dimension(const std::string& extractor) const;

  const std::vector<FeatureRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<FeatureRecord> records_;
  std::map<std::tuple<std::string, std::string, int>, std::size_t> index_;
  std::map<std::string, std::size_t> dims_;
};

class BitrateSet {
 public:
  void add(BitrateRecord rec);

  const BitrateRecord* find(const std::string& image, QualityLevel level) const;
  double bpp_at(const std::string& image, QualityLevel level) const;

  const std::vector<BitrateRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<BitrateRecord> records_;
  std::map<std::tuple<std::string, int>, std::size_t> index_;
};

// --- Ingestion -------------------------------------------------------------
//
// JSONL schemas (one record per line):
//   classification: {"machine": str, "image": str, "qp": int, "topk": [int,...]}
//   detection:      {"machine": str, "image": str, "qp": int,
//                    "dets": [{"bbox": [x,y,w,h], "cat": int, "conf": f},...]}
//   feature:        {"extractor": str, "image": str, "qp": int, "vec": [f,...]}
// Bitrates are flat and use CSV: header "image,qp,bpp".
//
// When a manifest is supplied, records referencing unknown machines, images,
// or off-ladder quality levels are rejected. Feature extractor ids are not
// required to appear in the manifest's machine list.

DatasetManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);

PerceptionSet ingest_perceptions(const std::vector<std::filesystem::path>& paths,
                                 Task task,
                                 const DatasetManifest* manifest = nullptr);
FeatureSet ingest_features(const std::vector<std::filesystem::path>& paths,
                           const DatasetManifest* manifest = nullptr);
BitrateSet ingest_bitrates(const std::vector<std::filesystem::path>& paths,
                           const DatasetManifest* manifest = nullptr);

// In-memory parsing entry points (ingest_* are thin file wrappers over these;
// the source name only decorates error messages).
void parse_perceptions_jsonl(const std::string& text, const std::string& source,
                             Task task, const DatasetManifest* manifest,
                             PerceptionSet& out);
void parse_features_jsonl(const std::string& text, const std::string& source,
                          const DatasetManifest* manifest, FeatureSet& out);
void parse_bitrates_csv(const std::string& text, const std::string& source,
                        const DatasetManifest* manifest, BitrateSet& out);

// --- Persistence -----------------------------------------------------------

std::string perceptions_to_jsonl(const PerceptionSet& set);
std::string features_to_jsonl(const FeatureSet& set);
std::string bitrates_to_csv(const BitrateSet& set);

// --- Completeness ----------------------------------------------------------

struct MissingCell {
  std::string machine;
  std::string image;
  QualityLevel level;

  bool operator==(const MissingCell&) const = default;
};

struct CompletenessReport {
  std::vector<MissingCell> missing;

  bool complete() const { return missing.empty(); }
};

// Lists every (machine, image, level) cell the manifest expects, including
// ORIGINAL, that is absent from the records. Report-only.
CompletenessReport validate_completeness(const DatasetManifest& manifest,
                                         const PerceptionSet& records);

std::string describe(const MissingCell& cell);

}  // namespace smrkit
