#pragma once

// Classification metrics: threshold accuracy and rank-based (Mann-Whitney)
// AUC with midrank tie handling. The midrank formulation is exactly equal to
// the all-pairs count [p+ > p-] + 0.5 [p+ = p-] because every quantity
// involved is a dyadic rational well inside double precision.

#include <algorithm>
#include <cmath>
#include <vector>

#include "fbt/common.hpp"

namespace fbt {

struct ConfusionCounts {
  size_t tp = 0, tn = 0, fp = 0, fn = 0;
  size_t total() const { return tp + tn + fp + fn; }
};

// A probability exactly at the threshold counts as a positive prediction.
inline double compute_accuracy(const std::vector<double>& probs, const std::vector<int>& labels,
                               double threshold = 0.5) {
  if (probs.size() != labels.size() || probs.empty())
    throw FbtError("compute_accuracy: length mismatch or empty input");
  size_t correct = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const int pred = probs[i] >= threshold ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

inline ConfusionCounts confusion_counts(const std::vector<double>& probs,
                                        const std::vector<int>& labels, double threshold = 0.5) {
  ConfusionCounts c;
  for (size_t i = 0; i < probs.size(); ++i) {
    const int pred = probs[i] >= threshold ? 1 : 0;
    if (pred == 1 && labels[i] == 1) c.tp++;
    if (pred == 0 && labels[i] == 0) c.tn++;
    if (pred == 1 && labels[i] == 0) c.fp++;
    if (pred == 0 && labels[i] == 1) c.fn++;
  }
  return c;
}

inline double compute_auc(const std::vector<double>& probs, const std::vector<int>& labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw FbtError("compute_auc: length mismatch or empty input");
  size_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw FbtError("compute_auc requires both classes present");

  std::vector<size_t> idx(probs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return probs[a] < probs[b]; });

  // midranks over tie groups; rank sum of positives
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j < idx.size() && probs[idx[j]] == probs[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1 .. j
    for (size_t k = i; k < j; ++k)
      if (labels[idx[k]]) pos_rank_sum += midrank;
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

}  // namespace fbt
