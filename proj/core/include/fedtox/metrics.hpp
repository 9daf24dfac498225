#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedtox/labeling.hpp"

namespace fedtox {

/// Binary confusion matrix with Toxic as the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  void add(Label truth, Label predicted) noexcept;
  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) noexcept;
  bool operator==(const Confusion&) const = default;
};

Confusion confusion_of(std::span<const Label> truth, std::span<const Label> predicted);

struct ClassificationMetrics {
  double macro_f1 = 0.0;
  double toxic_precision = 0.0;
  double toxic_recall = 0.0;
  double toxic_f1 = 0.0;
  double nontoxic_f1 = 0.0;
  Confusion confusion;
  // Undefined ratios are reported as 0 and flagged.
  bool toxic_precision_undefined = false;
  bool toxic_recall_undefined = false;
  bool toxic_class_absent = false;
  bool nontoxic_class_absent = false;
};

/// Macro F1 is the unweighted mean of the Toxic and NonToxic F1 scores. A class
/// missing from the ground truth contributes F1 = 0.
ClassificationMetrics compute_metrics(const Confusion& c) noexcept;

}  // namespace fedtox
