#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace smrkit {

enum class Task { kClassification, kDetection };

std::string to_string(Task task);
Task task_from_string(const std::string& s);

// One compression quality level. The uncompressed variant is the ORIGINAL
// sentinel, stored on disk as qp = 0; coded levels carry qp >= 1. Numeric
// comparison on qp is degradation order: ORIGINAL is strictly better than
// every coded level, and quality deteriorates as qp grows.
class QualityLevel {
 public:
  constexpr QualityLevel() = default;

  static constexpr QualityLevel original() { return QualityLevel{}; }

  static QualityLevel coded(int qp) {
    if (qp < 1) {
      throw std::runtime_error("coded quality level requires qp >= 1, got " +
                               std::to_string(qp));
    }
    QualityLevel q;
    q.qp_ = qp;
    return q;
  }

  // Disk encoding: qp 0 means ORIGINAL.
  static QualityLevel from_qp(int qp) {
    return qp == 0 ? original() : coded(qp);
  }

  constexpr int qp() const { return qp_; }
  constexpr bool is_original() const { return qp_ == 0; }

  auto operator<=>(const QualityLevel&) const = default;

 private:
  int qp_ = 0;
};

// The ordered set of coded quality levels declared by a dataset manifest,
// ascending degradation. ORIGINAL is implicit and always present.
class QpLadder {
 public:
  QpLadder() = default;
  explicit QpLadder(std::vector<int> coded_qps);

  const std::vector<QualityLevel>& coded() const { return coded_; }
  std::size_t size() const { return coded_.size(); }
  bool empty() const { return coded_.empty(); }

  // ORIGINAL followed by coded levels in degradation order.
  std::vector<QualityLevel> with_original() const;

  bool contains(QualityLevel level) const;
  // Index into coded(); nullopt for ORIGINAL or foreign levels.
  std::optional<std::size_t> index_of(QualityLevel level) const;

  int min_qp() const { return coded_.front().qp(); }
  int max_qp() const { return coded_.back().qp(); }

  bool operator==(const QpLadder&) const = default;

 private:
  std::vector<QualityLevel> coded_;
};

// Category ids ranked by predicted probability, highest first.
struct ClassificationPrediction {
  std::vector<int> ranked_categories;

  int top1() const {
    if (ranked_categories.empty()) {
      throw std::runtime_error("empty classification ranking");
    }
    return ranked_categories.front();
  }
};

struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

struct Detection {
  BBox bbox;
  int category = 0;
  double confidence = 0;

  bool operator==(const Detection&) const = default;
};

// One machine's perception of one image at one quality level.
struct PerceptionRecord {
  std::string machine;
  std::string image;
  QualityLevel level;
  std::variant<ClassificationPrediction, std::vector<Detection>> payload;

  const ClassificationPrediction& classification() const {
    return std::get<ClassificationPrediction>(payload);
  }
  const std::vector<Detection>& detections() const {
    return std::get<std::vector<Detection>>(payload);
  }
};

// A d-dimensional embedding of one image variant from a designated extractor.
struct FeatureRecord {
  std::string extractor;
  std::string image;
  QualityLevel level;
  std::vector<double> vec;
};

struct BitrateRecord {
  std::string image;
  QualityLevel level;
  double bpp = 0;
};

struct DatasetManifest {
  Task task = Task::kClassification;
  QpLadder ladder;
  std::vector<std::string> machines;
  std::vector<std::string> images;

  void validate() const;
  bool has_machine(const std::string& id) const;
  bool has_image(const std::string& id) const;
};

}  // namespace smrkit
