#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "rsnet/common.hpp"

namespace rsnet {

// Rows = ground truth, cols = prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<int64_t> counts;  // K x K row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int k) : num_classes(k), counts(size_t(k) * k, 0) {}

  int64_t& at(int truth, int pred) { return counts[size_t(truth) * num_classes + pred]; }
  int64_t at(int truth, int pred) const { return counts[size_t(truth) * num_classes + pred]; }

  int64_t total() const {
    int64_t t = 0;
    for (int64_t c : counts) t += c;
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (num_classes != other.num_classes) throw ShapeError("confusion matrix merge: class count");
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
  }
};

inline void confusion_update(ConfusionMatrix& cm, const std::vector<int>& truth,
                             const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("confusion_update: label vector lengths");
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= cm.num_classes || predicted[i] < 0 ||
        predicted[i] >= cm.num_classes)
      throw ValidationError("confusion_update: label out of range");
    ++cm.at(truth[i], predicted[i]);
  }
}

// IOU_c = TP / (TP + FP + FN); classes absent from both truth and prediction
// report -1 and are excluded from the mean.
inline std::vector<double> per_class_iou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("metrics: empty confusion matrix");
  const int k = cm.num_classes;
  std::vector<double> iou(k, -1.0);
  for (int c = 0; c < k; ++c) {
    int64_t tp = cm.at(c, c), row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    int64_t denom = row + col - tp;  // TP+FP+FN
    if (denom > 0) iou[c] = double(tp) / double(denom);
  }
  return iou;
}

inline double miou(const ConfusionMatrix& cm) {
  auto iou = per_class_iou(cm);
  double sum = 0.0;
  int present = 0;
  for (double v : iou)
    if (v >= 0.0) {
      sum += v;
      ++present;
    }
  return sum / present;
}

// Mean recall over classes present in the ground truth.
inline double macc(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("metrics: empty confusion matrix");
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < cm.num_classes; ++c) {
    int64_t row = 0;
    for (int j = 0; j < cm.num_classes; ++j) row += cm.at(c, j);
    if (row > 0) {
      sum += double(cm.at(c, c)) / double(row);
      ++present;
    }
  }
  if (present == 0) throw ValidationError("metrics: no ground-truth classes");
  return sum / present;
}

inline double overall_acc(const ConfusionMatrix& cm) {
  int64_t total = cm.total();
  if (total == 0) throw ValidationError("metrics: empty confusion matrix");
  int64_t tp = 0;
  for (int c = 0; c < cm.num_classes; ++c) tp += cm.at(c, c);
  return double(tp) / double(total);
}

// Flat key-value block, 4 decimals, used for CLI output and golden files.
inline std::string metrics_report(const ConfusionMatrix& cm,
                                  const std::vector<std::string>& class_names = {}) {
  auto name_of = [&](int c) {
    return c < int(class_names.size()) ? class_names[c] : "class" + std::to_string(c);
  };
  char buf[128];
  std::string out;
  auto kv = [&](const std::string& key, double value) {
    std::snprintf(buf, sizeof buf, "%s %.4f\n", key.c_str(), value);
    out += buf;
  };
  kv("overall_acc", overall_acc(cm));
  kv("macc", macc(cm));
  kv("miou", miou(cm));
  auto iou = per_class_iou(cm);
  for (int c = 0; c < cm.num_classes; ++c)
    if (iou[c] >= 0.0) kv("iou." + name_of(c), iou[c]);
  return out;
}

}  // namespace rsnet
