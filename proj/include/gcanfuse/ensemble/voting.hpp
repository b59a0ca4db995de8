#pragma once

#include <string>
#include <vector>

#include "../errors.hpp"
#include "metrics.hpp"

namespace gcanfuse {

/// One cross-validation fold of one model: its best inner-test F1 and its
/// probabilities on the held-out test set.
struct FoldRun {
  std::string model;
  std::size_t fold = 0;
  double best_f1 = 0;
  ProbMatrix test_probs;
};

struct EnsemblePrediction {
  ProbMatrix probs;
  LabelMatrix labels;
  std::vector<double> weights;
};

/// Dataset-level ensemble: fold j is weighted by F1_j / sum_f F1_f and the
/// weighted probabilities are thresholded at 0.5.
inline EnsemblePrediction soft_vote(const std::vector<FoldRun>& runs) {
  if (runs.empty()) throw UsageError("soft_vote: no fold runs");
  double total = 0;
  for (const auto& r : runs) {
    if (r.best_f1 < 0 || r.best_f1 > 1) throw DataError("soft_vote: F1 outside [0,1]");
    if (r.test_probs.rows() != runs[0].test_probs.rows() ||
        r.test_probs.cols() != runs[0].test_probs.cols())
      throw DataError("soft_vote: fold runs disagree on the test set shape");
    total += r.best_f1;
  }
  if (!(total > 0)) throw DataError("soft_vote: all fold F1 scores are zero");
  EnsemblePrediction out;
  out.probs = ProbMatrix::Zero(runs[0].test_probs.rows(), runs[0].test_probs.cols());
  for (const auto& r : runs) {
    double w = r.best_f1 / total;
    out.weights.push_back(w);
    out.probs += w * r.test_probs;
  }
  out.labels = threshold(out.probs);
  return out;
}

/// Model-level majority vote: 1 iff at least half of the m models vote 1,
/// i.e. 2 * ones >= m in integer arithmetic.
inline LabelMatrix hard_vote(const std::vector<LabelMatrix>& votes) {
  if (votes.empty()) throw UsageError("hard_vote: no models");
  LabelMatrix ones = LabelMatrix::Zero(votes[0].rows(), votes[0].cols());
  for (const auto& v : votes) {
    if (v.rows() != ones.rows() || v.cols() != ones.cols())
      throw UsageError("hard_vote: label matrices differ in shape");
    ones += v;
  }
  const int m = static_cast<int>(votes.size());
  return (2 * ones.array() >= m).cast<int>().matrix();
}

/// Sub-task A label: OR of the four sub-labels, per row.
inline LabelMatrix derive_taskA(const LabelMatrix& labels_b) {
  if (labels_b.cols() != 4) throw UsageError("derive_taskA: expected four sub-labels");
  return labels_b.rowwise().maxCoeff();
}

/// Sub-task A probability: max of the four sub-probabilities, per row.
inline ProbMatrix derive_taskA(const ProbMatrix& probs_b) {
  if (probs_b.cols() != 4) throw UsageError("derive_taskA: expected four sub-probabilities");
  return probs_b.rowwise().maxCoeff();
}

}  // namespace gcanfuse
