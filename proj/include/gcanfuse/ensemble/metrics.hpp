#pragma once

#include <Eigen/Dense>

#include <vector>

#include "../errors.hpp"

namespace gcanfuse {

using LabelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ProbMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDecisionThreshold = 0.5;

/// labels = [p >= 0.5] elementwise.
inline LabelMatrix threshold(const ProbMatrix& p) {
  return (p.array() >= kDecisionThreshold).cast<int>().matrix();
}

struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline ConfusionCounts confusion(const LabelMatrix& pred, const LabelMatrix& truth,
                                 Eigen::Index col, int positive = 1) {
  ConfusionCounts c;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    bool p = pred(r, col) == positive;
    bool t = truth(r, col) == positive;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// 2PR / (P + R), zero when P + R = 0.
inline double f1_from_counts(const ConfusionCounts& c) {
  double denom = 2.0 * c.tp + c.fp + c.fn;
  return denom > 0 ? 2.0 * c.tp / denom : 0.0;
}

struct F1Report {
  double macro_f1 = 0;
  double weighted_f1 = 0;
  std::vector<double> per_class;
  std::vector<long> support;
};

/// Per-label positive-class F1. With a single label column the report is the
/// binary {negative, positive} view: per_class = {F1(neg), F1(pos)} and the
/// macro average runs over both sides. With several label columns macro is
/// the plain mean and weighted uses the positive support of each label.
inline F1Report f1_scores(const LabelMatrix& pred, const LabelMatrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw UsageError("f1_scores: prediction and truth shapes differ");
  F1Report r;
  if (pred.cols() == 1) {
    ConfusionCounts pos = confusion(pred, truth, 0, 1);
    ConfusionCounts neg = confusion(pred, truth, 0, 0);
    r.per_class = {f1_from_counts(neg), f1_from_counts(pos)};
    r.support = {neg.tp + neg.fn, pos.tp + pos.fn};
  } else {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      ConfusionCounts cc = confusion(pred, truth, c, 1);
      r.per_class.push_back(f1_from_counts(cc));
      r.support.push_back(cc.tp + cc.fn);
    }
  }
  double sum = 0, wsum = 0;
  long total = 0;
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    sum += r.per_class[i];
    wsum += static_cast<double>(r.support[i]) * r.per_class[i];
    total += r.support[i];
  }
  r.macro_f1 = r.per_class.empty() ? 0.0 : sum / static_cast<double>(r.per_class.size());
  r.weighted_f1 = total > 0 ? wsum / static_cast<double>(total) : 0.0;
  return r;
}

}  // namespace gcanfuse
