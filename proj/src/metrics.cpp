#include "pcrowd/metrics.hpp"

#include <string>

#include "pcrowd/common.hpp"

namespace pcrowd {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ClassScores class_scores(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassScores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  // 2PR/(P+R) == 2tp/(2tp+fp+fn); the count form is exact for degenerate cells.
  s.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  s.support = tp + fn;
  return s;
}

}  // namespace

ConfusionMatrix confusion(std::span<const BinaryLabel> pred, std::span<const BinaryLabel> gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("confusion: length mismatch (" + std::to_string(pred.size()) + " vs " +
                          std::to_string(gold.size()) + ")");
  }
  if (pred.empty()) throw ValidationError("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == BinaryLabel::toxic;
    const bool g = gold[i] == BinaryLabel::toxic;
    if (p && g) ++cm.tp;
    else if (p) ++cm.fp;
    else if (g) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

ClassificationReport report(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("report: empty confusion matrix");
  ClassificationReport r;
  r.toxic = class_scores(cm.tp, cm.fp, cm.fn);
  // Class 0 as positive: its true positives are tn, false positives are fn.
  r.not_toxic = class_scores(cm.tn, cm.fn, cm.fp);
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.macro_avg_f1 = (r.toxic.f1 + r.not_toxic.f1) / 2.0;
  r.weighted_avg_f1 = (r.toxic.f1 * static_cast<double>(r.toxic.support) +
                       r.not_toxic.f1 * static_cast<double>(r.not_toxic.support)) /
                      static_cast<double>(cm.total());
  return r;
}

}  // namespace pcrowd
