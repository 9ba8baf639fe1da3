#pragma once

// Evaluation metrics: F1 (weighted / macro / micro), Cohen's kappa, MSE and
// the combined report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmqe/corpus.hpp"
#include "cmqe/error.hpp"

namespace cmqe {

enum class Subtask { A, B };
enum class F1Average { weighted, macro, micro };

// Square count matrix over `classes`; rows are gold, columns predicted.
struct ConfusionMatrix {
  std::vector<Label> classes;
  std::vector<std::uint64_t> counts;

  std::size_t size() const noexcept { return classes.size(); }
  std::uint64_t operator()(std::size_t gold, std::size_t pred) const noexcept {
    return counts[gold * classes.size() + pred];
  }
  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

namespace detail {

inline void check_pairs(std::span<const Label> golds, std::span<const Label> preds) {
  if (golds.size() != preds.size()) {
    throw DataError("gold and predicted label lists differ in length (" + std::to_string(golds.size()) + " vs " +
                    std::to_string(preds.size()) + ")");
  }
  if (golds.empty()) throw DataError("metrics need at least one labelled pair");
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (!std::isfinite(golds[i]) || !std::isfinite(preds[i])) {
      throw DataError("non-numeric label at position " + std::to_string(i));
    }
  }
}

inline std::size_t class_index(const std::vector<Label>& classes, Label l) {
  return static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), l) - classes.begin());
}

}  // namespace detail

// Classes are the sorted union of gold and predicted labels.
inline ConfusionMatrix confusion_matrix(std::span<const Label> golds, std::span<const Label> preds) {
  detail::check_pairs(golds, preds);
  ConfusionMatrix cm;
  cm.classes.assign(golds.begin(), golds.end());
  cm.classes.insert(cm.classes.end(), preds.begin(), preds.end());
  std::sort(cm.classes.begin(), cm.classes.end());
  cm.classes.erase(std::unique(cm.classes.begin(), cm.classes.end()), cm.classes.end());
  const std::size_t k = cm.classes.size();
  cm.counts.assign(k * k, 0);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++cm.counts[detail::class_index(cm.classes, golds[i]) * k + detail::class_index(cm.classes, preds[i])];
  }
  return cm;
}

// Per-class F1 is 2PR/(P+R), taken as 0 when P+R = 0 (a class that is never
// predicted correctly).
inline double f1_score(const ConfusionMatrix& cm, F1Average average = F1Average::weighted) {
  const std::size_t k = cm.size();
  const double n = static_cast<double>(cm.total());
  if (average == F1Average::micro) {
    double correct = 0.0;
    for (std::size_t c = 0; c < k; ++c) correct += static_cast<double>(cm(c, c));
    return correct / n;
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double gold_support = 0.0, predicted = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      gold_support += static_cast<double>(cm(c, j));
      predicted += static_cast<double>(cm(j, c));
    }
    const double tp = static_cast<double>(cm(c, c));
    const double precision = predicted > 0.0 ? tp / predicted : 0.0;
    const double recall = gold_support > 0.0 ? tp / gold_support : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    acc += average == F1Average::weighted ? gold_support * f1 : f1;
  }
  return average == F1Average::weighted ? acc / n : acc / static_cast<double>(k);
}

inline double f1_weighted(std::span<const Label> golds, std::span<const Label> preds) {
  return f1_score(confusion_matrix(golds, preds), F1Average::weighted);
}

// kappa = (p_o - p_e) / (1 - p_e). When p_e = 1 both raters used one and the
// same class everywhere, so agreement is perfect and kappa is 1.
inline double cohens_kappa(const ConfusionMatrix& cm) {
  const std::size_t k = cm.size();
  const double n = static_cast<double>(cm.total());
  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    observed += static_cast<double>(cm(c, c));
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += static_cast<double>(cm(c, j));
      col += static_cast<double>(cm(j, c));
    }
    expected += (row / n) * (col / n);
  }
  observed /= n;
  if (expected >= 1.0) return 1.0;
  return (observed - expected) / (1.0 - expected);
}

inline double cohens_kappa(std::span<const Label> golds, std::span<const Label> preds) {
  return cohens_kappa(confusion_matrix(golds, preds));
}

inline double mse(std::span<const Label> golds, std::span<const Label> preds) {
  detail::check_pairs(golds, preds);
  double total = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const double diff = golds[i] - preds[i];
    total += diff * diff;
  }
  return total / static_cast<double>(golds.size());
}

struct EvaluationReport {
  Subtask subtask = Subtask::A;
  std::size_t n = 0;
  double f1_weighted = 0.0;
  double cohens_kappa = 0.0;
  // Subtask B publishes no kappa; it is still computed but marked unofficial.
  bool kappa_official = true;
  double mse = 0.0;
  ConfusionMatrix confusion;
};

inline EvaluationReport evaluate(std::span<const Label> golds, std::span<const Label> preds, Subtask subtask) {
  EvaluationReport r;
  r.subtask = subtask;
  r.confusion = confusion_matrix(golds, preds);
  r.n = golds.size();
  r.f1_weighted = f1_score(r.confusion, F1Average::weighted);
  r.cohens_kappa = cohens_kappa(r.confusion);
  r.kappa_official = subtask == Subtask::A;
  r.mse = mse(golds, preds);
  return r;
}

}  // namespace cmqe
