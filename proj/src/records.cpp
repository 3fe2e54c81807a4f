#include "smrkit/records.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "smrkit/io.hpp"

namespace smrkit {

using nlohmann::json;

std::string to_string(Task task) {
  return task == Task::kClassification ? "classification" : "detection";
}

Task task_from_string(const std::string& s) {
  if (s == "classification") return Task::kClassification;
  if (s == "detection") return Task::kDetection;
  throw std::runtime_error("unknown task: " + s);
}

QpLadder::QpLadder(std::vector<int> coded_qps) {
  if (coded_qps.empty()) {
    throw std::runtime_error("QP ladder must be nonempty");
  }
  int prev = 0;
  coded_.reserve(coded_qps.size());
  for (int qp : coded_qps) {
    if (qp <= prev) {
      throw std::runtime_error(
          "QP ladder must be strictly increasing without duplicates, got " +
          std::to_string(qp) + " after " + std::to_string(prev));
    }
    coded_.push_back(QualityLevel::coded(qp));
    prev = qp;
  }
}

std::vector<QualityLevel> QpLadder::with_original() const {
  std::vector<QualityLevel> all;
  all.reserve(coded_.size() + 1);
  all.push_back(QualityLevel::original());
  all.insert(all.end(), coded_.begin(), coded_.end());
  return all;
}

bool QpLadder::contains(QualityLevel level) const {
  return index_of(level).has_value();
}

std::optional<std::size_t> QpLadder::index_of(QualityLevel level) const {
  auto it = std::lower_bound(coded_.begin(), coded_.end(), level);
  if (it == coded_.end() || *it != level) return std::nullopt;
  return static_cast<std::size_t>(it - coded_.begin());
}

void DatasetManifest::validate() const {
  if (machines.empty()) {
    throw std::runtime_error("manifest declares no machines");
  }
  if (ladder.empty()) {
    throw std::runtime_error("manifest declares an empty QP ladder");
  }
  std::set<std::string> seen;
  for (const auto& m : machines) {
    if (!seen.insert(m).second) {
      throw std::runtime_error("duplicate machine id in manifest: " + m);
    }
  }
  seen.clear();
  for (const auto& i : images) {
    if (!seen.insert(i).second) {
      throw std::runtime_error("duplicate image id in manifest: " + i);
    }
  }
}

bool DatasetManifest::has_machine(const std::string& id) const {
  return std::find(machines.begin(), machines.end(), id) != machines.end();
}

bool DatasetManifest::has_image(const std::string& id) const {
  return std::find(images.begin(), images.end(), id) != images.end();
}

namespace {

void check_id(const std::string& id, const char* what) {
  if (id.empty()) {
    throw std::runtime_error(std::string(what) + " id is empty");
  }
  for (char c : id) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r' ||
        static_cast<unsigned char>(c) < 0x20) {
      throw std::runtime_error(std::string(what) + " id '" + id +
                               "' contains a character not allowed in "
                               "CSV/JSONL interchange");
    }
  }
}

void check_level(QualityLevel level, const DatasetManifest* manifest) {
  if (manifest != nullptr && !level.is_original() &&
      !manifest->ladder.contains(level)) {
    throw std::runtime_error("qp " + std::to_string(level.qp()) +
                             " is not on the manifest ladder");
  }
}

[[noreturn]] void fail_line(const std::string& source, std::size_t line_no,
                            const std::string& message) {
  throw std::runtime_error(source + ":" + std::to_string(line_no) + ": " +
                           message);
}

// Calls handler(line_no, line) for each nonempty line.
template <typename Fn>
void for_each_line(const std::string& text, Fn&& handler) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) handler(line_no, line);
    if (end == text.size()) break;
    start = end + 1;
  }
}

}  // namespace

void PerceptionSet::add(PerceptionRecord rec) {
  auto key = std::make_tuple(rec.machine, rec.image, rec.level.qp());
  if (index_.count(key) != 0) {
    throw std::runtime_error("duplicate perception record (" + rec.machine +
                             ", " + rec.image + ", qp " +
                             std::to_string(rec.level.qp()) + ")");
  }
  index_[std::move(key)] = records_.size();
  records_.push_back(std::move(rec));
}

const PerceptionRecord* PerceptionSet::find(const std::string& machine,
                                            const std::string& image,
                                            QualityLevel level) const {
  auto it = index_.find(std::make_tuple(machine, image, level.qp()));
  return it == index_.end() ? nullptr : &records_[it->second];
}

const PerceptionRecord& PerceptionSet::at(const std::string& machine,
                                          const std::string& image,
                                          QualityLevel level) const {
  const PerceptionRecord* rec = find(machine, image, level);
  if (rec == nullptr) {
    throw std::runtime_error("missing perception record (" + machine + ", " +
                             image + ", qp " + std::to_string(level.qp()) +
                             ")");
  }
  return *rec;
}

void FeatureSet::add(FeatureRecord rec) {
  if (rec.vec.empty()) {
    throw std::runtime_error("feature vector is empty (" + rec.extractor +
                             ", " + rec.image + ")");
  }
  double norm_sq = 0;
  for (double v : rec.vec) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("non-finite feature entry (" + rec.extractor +
                               ", " + rec.image + ", qp " +
                               std::to_string(rec.level.qp()) + ")");
    }
    norm_sq += v * v;
  }
  if (norm_sq == 0) {
    throw std::runtime_error("zero-norm feature vector (" + rec.extractor +
                             ", " + rec.image + ", qp " +
                             std::to_string(rec.level.qp()) + ")");
  }
  auto [it, inserted] = dims_.emplace(rec.extractor, rec.vec.size());
  if (!inserted && it->second != rec.vec.size()) {
    throw std::runtime_error(
        "feature dimension mismatch for extractor " + rec.extractor +
        ": expected " + std::to_string(it->second) + ", got " +
        std::to_string(rec.vec.size()) + " (" + rec.image + ", qp " +
        std::to_string(rec.level.qp()) + ")");
  }
  auto key = std::make_tuple(rec.extractor, rec.image, rec.level.qp());
  if (index_.count(key) != 0) {
    throw std::runtime_error("duplicate feature record (" + rec.extractor +
                             ", " + rec.image + ", qp " +
                             std::to_string(rec.level.qp()) + ")");
  }
  index_[std::move(key)] = records_.size();
  records_.push_back(std::move(rec));
}

const FeatureRecord* FeatureSet::find(const std::string& extractor,
                                      const std::string& image,
                                      QualityLevel level) const {
  auto it = index_.find(std::make_tuple(extractor, image, level.qp()));
  return it == index_.end() ? nullptr : &records_[it->second];
}

const FeatureRecord& FeatureSet::at(const std::string& extractor,
                                    const std::string& image,
                                    QualityLevel level) const {
  const FeatureRecord* rec = find(extractor, image, level);
  if (rec == nullptr) {
    throw std::runtime_error("missing feature record (" + extractor + ", " +
                             image + ", qp " + std::to_string(level.qp()) +
                             ")");
  }
  return *rec;
}

std::vector<std::string> FeatureSet::extractors() const {
  std::vector<std::string> out;
  out.reserve(dims_.size());
  for (const auto& [id, dim] : dims_) out.push_back(id);
  return out;
}

std::size_t FeatureSet::dimension(const std::string& extractor) const {
  auto it = dims_.find(extractor);
  if (it == dims_.end()) {
    throw std::runtime_error("no features ingested for extractor " + extractor);
  }
  return it->second;
}

void BitrateSet::add(BitrateRecord rec) {
  if (rec.level.is_original()) {
    throw std::runtime_error("bitrate record for ORIGINAL level (" + rec.image +
                             "); only coded levels carry bitrates");
  }
  if (!(rec.bpp > 0) || !std::isfinite(rec.bpp)) {
    throw std::runtime_error("bpp must be a positive finite number (" +
                             rec.image + ", qp " +
                             std::to_string(rec.level.qp()) + ")");
  }
  auto key = std::make_tuple(rec.image, rec.level.qp());
  if (index_.count(key) != 0) {
    throw std::runtime_error("duplicate bitrate record (" + rec.image +
                             ", qp " + std::to_string(rec.level.qp()) + ")");
  }
  index_[std::move(key)] = records_.size();
  records_.push_back(std::move(rec));
}

const BitrateRecord* BitrateSet::find(const std::string& image,
                                      QualityLevel level) const {
  auto it = index_.find(std::make_tuple(image, level.qp()));
  return it == index_.end() ? nullptr : &records_[it->second];
}

double BitrateSet::bpp_at(const std::string& image, QualityLevel level) const {
  const BitrateRecord* rec = find(image, level);
  if (rec == nullptr) {
    throw std::runtime_error("missing bitrate record (" + image + ", qp " +
                             std::to_string(level.qp()) + ")");
  }
  return rec->bpp;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.task = task_from_string(doc.at("task").get<std::string>());
    m.ladder = QpLadder(doc.at("ladder").get<std::vector<int>>());
    m.machines = doc.at("machines").get<std::vector<std::string>>();
    m.images = doc.at("images").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
  for (const auto& id : m.machines) check_id(id, "machine");
  for (const auto& id : m.images) check_id(id, "image");
  m.validate();
  return m;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json doc;
  doc["task"] = to_string(manifest.task);
  json ladder = json::array();
  for (QualityLevel q : manifest.ladder.coded()) ladder.push_back(q.qp());
  doc["ladder"] = std::move(ladder);
  doc["machines"] = manifest.machines;
  doc["images"] = manifest.images;
  return doc.dump(2) + "\n";
}

void parse_perceptions_jsonl(const std::string& text, const std::string& source,
                             Task task, const DatasetManifest* manifest,
                             PerceptionSet& out) {
  for_each_line(text, [&](std::size_t line_no, const std::string& line) {
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    PerceptionRecord rec;
    try {
      rec.machine = doc.at("machine").get<std::string>();
      rec.image = doc.at("image").get<std::string>();
      rec.level = QualityLevel::from_qp(doc.at("qp").get<int>());
      if (task == Task::kClassification) {
        ClassificationPrediction pred;
        pred.ranked_categories = doc.at("topk").get<std::vector<int>>();
        if (pred.ranked_categories.empty()) {
          fail_line(source, line_no, "topk ranking is empty");
        }
        std::set<int> unique(pred.ranked_categories.begin(),
                             pred.ranked_categories.end());
        if (unique.size() != pred.ranked_categories.size()) {
          fail_line(source, line_no, "topk ranking contains duplicates");
        }
        rec.payload = std::move(pred);
      } else {
        std::vector<Detection> dets;
        for (const json& d : doc.at("dets")) {
          Detection det;
          const json& bb = d.at("bbox");
          if (!bb.is_array() || bb.size() != 4) {
            fail_line(source, line_no, "bbox must be [x, y, w, h]");
          }
          det.bbox = BBox{bb[0].get<double>(), bb[1].get<double>(),
                          bb[2].get<double>(), bb[3].get<double>()};
          det.category = d.at("cat").get<int>();
          det.confidence = d.at("conf").get<double>();
          if (!(det.bbox.w > 0) || !(det.bbox.h > 0)) {
            fail_line(source, line_no, "bbox width and height must be > 0");
          }
          if (det.confidence < 0 || det.confidence > 1 ||
              !std::isfinite(det.confidence)) {
            fail_line(source, line_no, "confidence must lie in [0, 1]");
          }
          dets.push_back(det);
        }
        rec.payload = std::move(dets);
      }
    } catch (const json::exception& e) {
      fail_line(source, line_no, std::string("schema error: ") + e.what());
    }
    try {
      check_id(rec.machine, "machine");
      check_id(rec.image, "image");
      if (manifest != nullptr) {
        if (!manifest->has_machine(rec.machine)) {
          throw std::runtime_error("machine '" + rec.machine +
                                   "' is not in the manifest");
        }
        if (!manifest->has_image(rec.image)) {
          throw std::runtime_error("image '" + rec.image +
                                   "' is not in the manifest");
        }
        check_level(rec.level, manifest);
      }
      out.add(std::move(rec));
    } catch (const std::runtime_error& e) {
      fail_line(source, line_no, e.what());
    }
  });
}

void parse_features_jsonl(const std::string& text, const std::string& source,
                          const DatasetManifest* manifest, FeatureSet& out) {
  for_each_line(text, [&](std::size_t line_no, const std::string& line) {
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    FeatureRecord rec;
    try {
      rec.extractor = doc.at("extractor").get<std::string>();
      rec.image = doc.at("image").get<std::string>();
      rec.level = QualityLevel::from_qp(doc.at("qp").get<int>());
      rec.vec = doc.at("vec").get<std::vector<double>>();
    } catch (const json::exception& e) {
      fail_line(source, line_no, std::string("schema error: ") + e.what());
    }
    try {
      check_id(rec.extractor, "extractor");
      check_id(rec.image, "image");
      if (manifest != nullptr) {
        if (!manifest->has_image(rec.image)) {
          throw std::runtime_error("image '" + rec.image +
                                   "' is not in the manifest");
        }
        check_level(rec.level, manifest);
      }
      out.add(std::move(rec));
    } catch (const std::runtime_error& e) {
      fail_line(source, line_no, e.what());
    }
  });
}

void parse_bitrates_csv(const std::string& text, const std::string& source,
                        const DatasetManifest* manifest, BitrateSet& out) {
  bool saw_header = false;
  for_each_line(text, [&](std::size_t line_no, const std::string& line) {
    std::vector<std::string> fields = split_csv_line(line);
    if (!saw_header) {
      saw_header = true;
      if (fields == std::vector<std::string>{"image", "qp", "bpp"}) return;
      // Headerless files are accepted; fall through and parse as data.
    }
    if (fields.size() != 3) {
      fail_line(source, line_no, "expected 3 fields: image,qp,bpp");
    }
    BitrateRecord rec;
    rec.image = fields[0];
    try {
      std::size_t pos = 0;
      int qp = std::stoi(fields[1], &pos);
      if (pos != fields[1].size()) throw std::invalid_argument(fields[1]);
      rec.level = QualityLevel::from_qp(qp);
      pos = 0;
      rec.bpp = std::stod(fields[2], &pos);
      if (pos != fields[2].size()) throw std::invalid_argument(fields[2]);
    } catch (const std::exception&) {
      fail_line(source, line_no, "cannot parse qp/bpp fields");
    }
    try {
      check_id(rec.image, "image");
      if (manifest != nullptr) {
        if (!manifest->has_image(rec.image)) {
          throw std::runtime_error("image '" + rec.image +
                                   "' is not in the manifest");
        }
        check_level(rec.level, manifest);
      }
      out.add(std::move(rec));
    } catch (const std::runtime_error& e) {
      fail_line(source, line_no, e.what());
    }
  });
}

PerceptionSet ingest_perceptions(const std::vector<std::filesystem::path>& paths,
                                 Task task, const DatasetManifest* manifest) {
  PerceptionSet set;
  for (const auto& path : paths) {
    parse_perceptions_jsonl(read_file(path), path.string(), task, manifest, set);
  }
  return set;
}

FeatureSet ingest_features(const std::vector<std::filesystem::path>& paths,
                           const DatasetManifest* manifest) {
  FeatureSet set;
  for (const auto& path : paths) {
    parse_features_jsonl(read_file(path), path.string(), manifest, set);
  }
  return set;
}

BitrateSet ingest_bitrates(const std::vector<std::filesystem::path>& paths,
                           const DatasetManifest* manifest) {
  BitrateSet set;
  for (const auto& path : paths) {
    parse_bitrates_csv(read_file(path), path.string(), manifest, set);
  }
  return set;
}

std::string perceptions_to_jsonl(const PerceptionSet& set) {
  std::string out;
  for (const PerceptionRecord& rec : set.records()) {
    json doc;
    doc["machine"] = rec.machine;
    doc["image"] = rec.image;
    doc["qp"] = rec.level.qp();
    if (std::holds_alternative<ClassificationPrediction>(rec.payload)) {
      doc["topk"] = rec.classification().ranked_categories;
    } else {
      json dets = json::array();
      for (const Detection& d : rec.detections()) {
        json det;
        det["bbox"] = {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
        det["cat"] = d.category;
        det["conf"] = d.confidence;
        dets.push_back(std::move(det));
      }
      doc["dets"] = std::move(dets);
    }
    out += doc.dump();
    out += '\n';
  }
  return out;
}

std::string features_to_jsonl(const FeatureSet& set) {
  std::string out;
  for (const FeatureRecord& rec : set.records()) {
    json doc;
    doc["extractor"] = rec.extractor;
    doc["image"] = rec.image;
    doc["qp"] = rec.level.qp();
    doc["vec"] = rec.vec;
    out += doc.dump();
    out += '\n';
  }
  return out;
}

std::string bitrates_to_csv(const BitrateSet& set) {
  std::string out = "image,qp,bpp\n";
  for (const BitrateRecord& rec : set.records()) {
    out += rec.image;
    out += ',';
    out += std::to_string(rec.level.qp());
    out += ',';
    out += format_num(rec.bpp);
    out += '\n';
  }
  return out;
}

CompletenessReport validate_completeness(const DatasetManifest& manifest,
                                         const PerceptionSet& records) {
  CompletenessReport report;
  const std::vector<QualityLevel> levels = manifest.ladder.with_original();
  for (const auto& machine : manifest.machines) {
    for (const auto& image : manifest.images) {
      for (QualityLevel level : levels) {
        if (records.find(machine, image, level) == nullptr) {
          report.missing.push_back(MissingCell{machine, image, level});
        }
      }
    }
  }
  return report;
}

std::string describe(const MissingCell& cell) {
  return "(" + cell.machine + ", " + cell.image + ", qp " +
         std::to_string(cell.level.qp()) + ")";
}

}  // namespace smrkit
