#include "smrkit/smr.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "smrkit/io.hpp"
#include "smrkit/parallel.hpp"
#include "smrkit/rng.hpp"

namespace smrkit {

SmrType::SmrType(ClassificationSmrType cls) : spec_(std::move(cls)) {
  const auto& c = std::get<ClassificationSmrType>(spec_);
  if (c.k != 1 && c.k != 3 && c.k != 5) {
    throw std::runtime_error("classification SMR type requires k in {1,3,5}");
  }
}

SmrType::SmrType(DetectionSmrType det) : spec_(std::move(det)) {
  const auto& d = std::get<DetectionSmrType>(spec_);
  if (!(d.t_s > 0) || d.t_s > 1) {
    throw std::runtime_error("detection SMR type requires t_s in (0, 1]");
  }
  DetectionScoringConfig cfg{d.iou_grid, 0.3};
  cfg.validate();
}

SmrType SmrType::top_k(int k, std::string library) {
  return SmrType(ClassificationSmrType{k, std::move(library)});
}

SmrType SmrType::detection(double t_s, std::vector<double> iou_grid) {
  return SmrType(DetectionSmrType{std::move(iou_grid), t_s});
}

Task SmrType::task() const {
  return std::holds_alternative<ClassificationSmrType>(spec_)
             ? Task::kClassification
             : Task::kDetection;
}

const ClassificationSmrType& SmrType::classification() const {
  return std::get<ClassificationSmrType>(spec_);
}

const DetectionSmrType& SmrType::detection_spec() const {
  return std::get<DetectionSmrType>(spec_);
}

double SmrType::effective_threshold() const {
  return task() == Task::kClassification ? 1.0 : detection_spec().t_s;
}

namespace {

std::vector<double> parse_iou_spec(const std::string& text) {
  std::vector<double> grid;
  if (text.find(',') != std::string::npos) {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
  } else if (std::count(text.begin(), text.end(), '-') == 2) {
    const std::size_t p1 = text.find('-');
    const std::size_t p2 = text.find('-', p1 + 1);
    const double lo = std::stod(text.substr(0, p1));
    const double hi = std::stod(text.substr(p1 + 1, p2 - p1 - 1));
    const double step = std::stod(text.substr(p2 + 1));
    if (!(step > 0)) throw std::runtime_error("IOU range step must be > 0");
    for (double v = lo; v <= hi + 1e-9; v += step) grid.push_back(round_num(v));
  } else {
    grid.push_back(std::stod(text));
  }
  return grid;
}

}  // namespace

SmrType SmrType::parse(const std::string& text) {
  try {
    if (text.rfind("top", 0) == 0) {
      std::string body = text.substr(3);
      std::string library;
      const std::size_t at = body.find('@');
      if (at != std::string::npos) {
        library = body.substr(at + 1);
        body = body.substr(0, at);
      }
      return top_k(std::stoi(body), library);
    }
    if (text.rfind("det:", 0) == 0) {
      const std::string body = text.substr(4);
      const std::size_t colon = body.find(':');
      if (colon == std::string::npos) {
        return detection(std::stod(body));
      }
      return detection(std::stod(body.substr(0, colon)),
                       parse_iou_spec(body.substr(colon + 1)));
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot parse SMR type '" + text + "': " +
                             e.what());
  }
  throw std::runtime_error("cannot parse SMR type '" + text +
                           "' (expected topK[@lib] or det:TS[:IOU])");
}

std::string SmrType::name() const {
  if (task() == Task::kClassification) {
    const auto& c = classification();
    std::string s = "top" + std::to_string(c.k);
    if (!c.library.empty()) s += "@" + c.library;
    return s;
  }
  const auto& d = detection_spec();
  std::string s = "det:" + format_num(d.t_s);
  if (d.iou_grid == DetectionScoringConfig::default_iou_grid()) return s;
  s += ":";
  for (std::size_t i = 0; i < d.iou_grid.size(); ++i) {
    if (i > 0) s += ",";
    s += format_num(d.iou_grid[i]);
  }
  return s;
}

std::string SmrType::file_tag() const {
  std::string tag = name();
  for (char& c : tag) {
    if (c == ':' || c == '@' || c == ',') c = '_';
  }
  return tag;
}

const SmrEntry& SmrTable::at(QualityLevel level) const {
  auto it = entries.find(level);
  if (it == entries.end()) {
    throw std::runtime_error("SMR table for " + image + " has no entry at qp " +
                             std::to_string(level.qp()));
  }
  return it->second;
}

double SmrDistribution::at(QualityLevel level) const {
  auto it = mean_smr.find(level);
  if (it == mean_smr.end()) {
    throw std::runtime_error("SMR distribution has no entry at qp " +
                             std::to_string(level.qp()));
  }
  return it->second;
}

double smr(const std::vector<SatisfactionScore>& scores, double t_s) {
  if (scores.empty()) {
    throw std::runtime_error("SMR over an empty machine set is undefined");
  }
  std::size_t satisfied = 0;
  for (const SatisfactionScore& s : scores) {
    if (s.value >= t_s) ++satisfied;
  }
  return static_cast<double>(satisfied) / static_cast<double>(scores.size());
}

namespace {

// value per (level index, machine index); nullopt when the machine lacks a
// record at the level or at ORIGINAL.
struct ImageScores {
  std::vector<std::vector<std::optional<double>>> values;
  bool vacuous = false;
};

ImageScores score_image(const DatasetManifest& manifest,
                        const PerceptionSet& records, const SmrType& type,
                        const std::string& image, double conf_threshold) {
  const std::vector<QualityLevel> levels = manifest.ladder.with_original();
  ImageScores out;
  out.values.assign(levels.size(),
                    std::vector<std::optional<double>>(manifest.machines.size()));
  for (std::size_t mi = 0; mi < manifest.machines.size(); ++mi) {
    const std::string& machine = manifest.machines[mi];
    const PerceptionRecord* original =
        records.find(machine, image, QualityLevel::original());
    if (original == nullptr) continue;
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const PerceptionRecord* rec = records.find(machine, image, levels[li]);
      if (rec == nullptr) continue;
      if (type.task() == Task::kClassification) {
        const SatisfactionScore s = score_classification(
            rec->classification(), original->classification(),
            type.classification().k);
        out.values[li][mi] = s.value;
      } else {
        DetectionScoringConfig cfg{type.detection_spec().iou_grid,
                                   conf_threshold};
        const SatisfactionScore s =
            score_detection(rec->detections(), original->detections(), cfg);
        out.values[li][mi] = s.value;
        if (s.vacuous) out.vacuous = true;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<SmrTable> annotate(const DatasetManifest& manifest,
                               const PerceptionSet& records,
                               const SmrType& type,
                               const AnnotateOptions& options) {
  manifest.validate();
  if (options.strict) {
    const CompletenessReport report = validate_completeness(manifest, records);
    if (!report.complete()) {
      throw std::runtime_error(
          "strict annotation requires complete records: " +
          std::to_string(report.missing.size()) + " missing cell(s), first " +
          describe(report.missing.front()));
    }
  }
  const std::vector<QualityLevel> levels = manifest.ladder.with_original();
  const double threshold = type.effective_threshold();
  const double conf_threshold = 0.3;

  std::vector<ImageScores> scored(manifest.images.size());
  parallel_for(manifest.images.size(), options.workers, [&](std::size_t i) {
    scored[i] =
        score_image(manifest, records, type, manifest.images[i], conf_threshold);
  });

  std::vector<SmrTable> tables;
  tables.reserve(manifest.images.size());
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const ImageScores& sc = scored[i];
    if (options.exclude_vacuous && sc.vacuous) continue;
    SmrTable table;
    table.image = manifest.images[i];
    table.smr_type = type.name();
    table.vacuous = sc.vacuous;
    for (std::size_t li = 0; li < levels.size(); ++li) {
      std::vector<SatisfactionScore> scores;
      for (const auto& v : sc.values[li]) {
        if (v.has_value()) {
          scores.push_back(SatisfactionScore{*v, type.task(), false});
        }
      }
      if (scores.empty()) {
        throw std::runtime_error("no machine covers (" + table.image +
                                 ", qp " + std::to_string(levels[li].qp()) +
                                 "); cannot form SMR");
      }
      table.entries[levels[li]] =
          SmrEntry{smr(scores, threshold), static_cast<int>(scores.size())};
    }
    tables.push_back(std::move(table));
  }
  return tables;
}

SmrDistribution distribution(const std::vector<SmrTable>& tables) {
  if (tables.empty()) {
    throw std::runtime_error("cannot build a distribution from zero tables");
  }
  SmrDistribution dist;
  dist.smr_type = tables.front().smr_type;
  for (const SmrTable& t : tables) {
    if (t.smr_type != dist.smr_type) {
      throw std::runtime_error("distribution input mixes SMR types: " +
                               dist.smr_type + " vs " + t.smr_type);
    }
    if (t.entries.size() != tables.front().entries.size()) {
      throw std::runtime_error("distribution input mixes ladders");
    }
  }
  for (const auto& [level, entry] : tables.front().entries) {
    double sum = 0;
    for (const SmrTable& t : tables) sum += t.at(level).smr;
    dist.mean_smr[level] = sum / static_cast<double>(tables.size());
  }
  return dist;
}

SubsetConsistencyResult subset_consistency(const DatasetManifest& manifest,
                                           const PerceptionSet& records,
                                           const SmrType& type, int n_m,
                                           int repetitions, std::uint64_t seed,
                                           const AnnotateOptions& options) {
  manifest.validate();
  const int n_machines = static_cast<int>(manifest.machines.size());
  if (n_m < 1 || n_m > n_machines) {
    throw std::runtime_error("subset size " + std::to_string(n_m) +
                             " out of range [1, " +
                             std::to_string(n_machines) + "]");
  }
  if (repetitions < 1) {
    throw std::runtime_error("repetitions must be >= 1");
  }
  if (options.strict) {
    const CompletenessReport report = validate_completeness(manifest, records);
    if (!report.complete()) {
      throw std::runtime_error(
          "subset study requires complete records: " +
          std::to_string(report.missing.size()) + " missing cell(s), first " +
          describe(report.missing.front()));
    }
  }

  const std::vector<QualityLevel> levels = manifest.ladder.with_original();
  const double threshold = type.effective_threshold();

  std::vector<ImageScores> scored(manifest.images.size());
  parallel_for(manifest.images.size(), options.workers, [&](std::size_t i) {
    scored[i] = score_image(manifest, records, type, manifest.images[i], 0.3);
  });

  // Mean satisfaction ratio over a machine subset for one (image, level).
  // Coded levels only: ORIGINAL is 1.0 under any subset and would deflate
  // the MAE.
  auto subset_smr = [&](const ImageScores& sc, std::size_t li,
                        const std::vector<std::size_t>& machine_idx)
      -> std::optional<double> {
    std::size_t present = 0;
    std::size_t satisfied = 0;
    for (std::size_t mi : machine_idx) {
      const auto& v = sc.values[li][mi];
      if (!v.has_value()) continue;
      ++present;
      if (*v >= threshold) ++satisfied;
    }
    if (present == 0) return std::nullopt;
    return static_cast<double>(satisfied) / static_cast<double>(present);
  };

  std::vector<std::size_t> all_machines(manifest.machines.size());
  for (std::size_t i = 0; i < all_machines.size(); ++i) all_machines[i] = i;

  SubsetConsistencyResult result;
  result.n_m = n_m;
  result.repetitions = repetitions;
  for (int rep = 0; rep < repetitions; ++rep) {
    RandomStream stream(seed, "subset/" + std::to_string(n_m) + "/" +
                                  std::to_string(rep));
    const std::vector<std::size_t> subset = stream.sample_without_replacement(
        manifest.machines.size(), static_cast<std::size_t>(n_m));
    double abs_err_sum = 0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
      for (std::size_t li = 1; li < levels.size(); ++li) {  // skip ORIGINAL
        const auto full = subset_smr(scored[i], li, all_machines);
        const auto sub = subset_smr(scored[i], li, subset);
        if (!full.has_value() || !sub.has_value()) continue;
        abs_err_sum += std::abs(*full - *sub);
        ++cells;
      }
    }
    if (cells == 0) {
      throw std::runtime_error("subset study found no comparable cells");
    }
    result.per_repetition.push_back(abs_err_sum /
                                    static_cast<double>(cells));
  }
  for (double mae : result.per_repetition) result.mean_mae += mae;
  result.mean_mae /= static_cast<double>(repetitions);
  return result;
}

std::vector<OrderingViolation> ordering_check(
    const std::vector<std::vector<SmrTable>>& tables_by_ascending_k) {
  std::vector<OrderingViolation> violations;
  if (tables_by_ascending_k.size() < 2) return violations;
  const std::vector<SmrTable>& first = tables_by_ascending_k.front();
  for (const auto& group : tables_by_ascending_k) {
    if (group.size() != first.size()) {
      throw std::runtime_error("ordering check requires aligned table groups");
    }
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i].image != first[i].image ||
          group[i].entries.size() != first[i].entries.size()) {
        throw std::runtime_error(
            "ordering check requires tables aligned by image and level");
      }
    }
  }
  for (std::size_t g = 0; g + 1 < tables_by_ascending_k.size(); ++g) {
    const auto& lower = tables_by_ascending_k[g];
    const auto& upper = tables_by_ascending_k[g + 1];
    for (std::size_t i = 0; i < lower.size(); ++i) {
      for (const auto& [level, entry] : lower[i].entries) {
        const double hi = upper[i].at(level).smr;
        if (entry.smr > hi) {
          violations.push_back(
              OrderingViolation{lower[i].image, level, entry.smr, hi});
        }
      }
    }
  }
  return violations;
}

std::string tables_to_csv(const std::vector<SmrTable>& tables) {
  std::string out = "image,smr_type,qp,smr,machine_count\n";
  for (const SmrTable& t : tables) {
    for (const auto& [level, entry] : t.entries) {
      out += t.image;
      out += ',';
      out += t.smr_type;
      out += ',';
      out += std::to_string(level.qp());
      out += ',';
      out += format_num(entry.smr);
      out += ',';
      out += std::to_string(entry.machine_count);
      out += '\n';
    }
  }
  return out;
}

std::vector<SmrTable> tables_from_csv(const std::string& text) {
  std::vector<SmrTable> tables;
  std::map<std::string, std::size_t> by_image;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (line_no == 1 && !f.empty() && f[0] == "image") continue;
    if (f.size() != 5) {
      throw std::runtime_error("SMR table CSV line " + std::to_string(line_no) +
                               ": expected 5 fields");
    }
    auto [it, inserted] = by_image.emplace(f[0], tables.size());
    if (inserted) {
      tables.push_back(SmrTable{f[0], f[1], {}, false});
    }
    SmrTable& table = tables[it->second];
    if (table.smr_type != f[1]) {
      throw std::runtime_error("SMR table CSV mixes types for image " + f[0]);
    }
    try {
      const QualityLevel level = QualityLevel::from_qp(std::stoi(f[2]));
      if (table.entries.count(level) != 0) {
        throw std::runtime_error("repeated (" + f[0] + ", qp " + f[2] + ")");
      }
      table.entries[level] = SmrEntry{std::stod(f[3]), std::stoi(f[4])};
    } catch (const std::exception& e) {
      throw std::runtime_error("SMR table CSV line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return tables;
}

std::string tables_to_jsonl(const std::vector<SmrTable>& tables) {
  std::string out;
  for (const SmrTable& t : tables) {
    for (const auto& [level, entry] : t.entries) {
      out += "{\"image\":\"" + t.image + "\",\"smr_type\":\"" + t.smr_type +
             "\",\"qp\":" + std::to_string(level.qp()) +
             ",\"smr\":" + format_num(entry.smr) +
             ",\"machine_count\":" + std::to_string(entry.machine_count) + "}\n";
    }
  }
  return out;
}

std::string distribution_to_csv(const SmrDistribution& dist) {
  std::string out = "qp,mean_smr\n";
  for (const auto& [level, mean] : dist.mean_smr) {
    out += std::to_string(level.qp());
    out += ',';
    out += format_num(mean);
    out += '\n';
  }
  return out;
}

SmrDistribution distribution_from_csv(const std::string& text,
                                      const std::string& smr_type) {
  SmrDistribution dist;
  dist.smr_type = smr_type;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (line_no == 1 && !f.empty() && f[0] == "qp") continue;
    if (f.size() != 2) {
      throw std::runtime_error("distribution CSV line " +
                               std::to_string(line_no) + ": expected 2 fields");
    }
    try {
      dist.mean_smr[QualityLevel::from_qp(std::stoi(f[0]))] = std::stod(f[1]);
    } catch (const std::exception& e) {
      throw std::runtime_error("distribution CSV line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  if (dist.mean_smr.empty()) {
    throw std::runtime_error("distribution CSV is empty");
  }
  return dist;
}

}  // namespace smrkit
