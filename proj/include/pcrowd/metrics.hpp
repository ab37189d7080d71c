#pragma once

#include <cstddef>
#include <span>

#include "pcrowd/labels.hpp"

namespace pcrowd {

// Positive class = toxic.
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  ClassScores not_toxic;  // class 0
  ClassScores toxic;      // class 1
  double accuracy = 0.0;
  double macro_avg_f1 = 0.0;
  double weighted_avg_f1 = 0.0;
};

ConfusionMatrix confusion(std::span<const BinaryLabel> pred, std::span<const BinaryLabel> gold);

// Undefined ratios (0/0) score 0.
ClassificationReport report(const ConfusionMatrix& cm);

inline double macro_f1(std::span<const BinaryLabel> pred, std::span<const BinaryLabel> gold) {
  return report(confusion(pred, gold)).macro_avg_f1;
}

}  // namespace pcrowd
