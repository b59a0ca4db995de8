#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "../errors.hpp"
#include "../nn/parameter.hpp"

namespace gcanfuse {

enum class Setup { A, B };

inline constexpr double kProbClamp = 1e-12;

/// Sub-task B class order.
enum SubClass { kShm = 0, kSte = 1, kObj = 2, kVio = 3 };
inline constexpr int kNumSubClasses = 4;

struct LossWeights {
  std::array<double, kNumSubClasses> w{0.25, 0.25, 0.25, 0.25};
};

struct LossMix {
  double weighted_bce = 0.7;
  double teacher_forcing = 0.3;
};

/// Loss value and its gradient w.r.t. the probability matrix.
struct LossValue {
  double value = 0;
  nn::Mat grad;
};

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Mean over every entry of -[y ln p + (1-y) ln(1-p)].
inline LossValue bce_with_grad(const nn::Mat& p, const nn::Mat& y) {
  if (p.rows() != y.rows() || p.cols() != y.cols()) throw UsageError("bce: shape mismatch");
  LossValue out;
  out.grad.resize(p.rows(), p.cols());
  const double n = static_cast<double>(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double raw = p.data()[i];
    double q = clamp_prob(raw);
    double t = y.data()[i];
    out.value -= t * std::log(q) + (1 - t) * std::log(1 - q);
    // The clamp is flat outside its range.
    out.grad.data()[i] = (raw == q) ? (-t / q + (1 - t) / (1 - q)) / n : 0.0;
  }
  out.value /= n;
  return out;
}

inline double bce(const nn::Mat& p, const nn::Mat& y) { return bce_with_grad(p, y).value; }

/// w_c = (NoS / NoS(c)) / sum_c' (NoS / NoS(c')).
inline LossWeights class_weights(const std::array<double, kNumSubClasses>& counts,
                                 double total) {
  if (!(total > 0)) throw DataError("class_weights: total sample count must be positive");
  std::array<double, kNumSubClasses> inv{};
  double sum = 0;
  for (int c = 0; c < kNumSubClasses; ++c) {
    if (!(counts[c] > 0)) throw DataError("class_weights: degenerate class with zero support");
    inv[c] = total / counts[c];
    sum += inv[c];
  }
  LossWeights lw;
  for (int c = 0; c < kNumSubClasses; ++c) lw.w[c] = inv[c] / sum;
  return lw;
}

/// L1 = sum_c w_c BCE(p_c, y_c); each class term is a mean over the batch.
inline LossValue weighted_bce_with_grad(const nn::Mat& p, const nn::Mat& y,
                                        const LossWeights& w) {
  if (p.cols() != kNumSubClasses || y.cols() != kNumSubClasses || p.rows() != y.rows())
    throw UsageError("weighted_bce: expected batch x 4 probabilities");
  LossValue out;
  out.grad = nn::Mat::Zero(p.rows(), p.cols());
  for (int c = 0; c < kNumSubClasses; ++c) {
    LossValue term = bce_with_grad(p.col(c), y.col(c));
    out.value += w.w[c] * term.value;
    out.grad.col(c) = w.w[c] * term.grad;
  }
  return out;
}

inline double weighted_bce(const nn::Mat& p, const nn::Mat& y, const LossWeights& w) {
  return weighted_bce_with_grad(p, y, w).value;
}

/// p^A = max_c p_c per row (first index on ties).
inline double taskA_probability(const nn::RowVec& pb) { return pb.maxCoeff(); }

/// L2 = mean over the batch of (max_c p_c - y_A)^2.
inline LossValue teacher_forcing_with_grad(const nn::Mat& p, const Eigen::VectorXd& y_a) {
  if (p.cols() != kNumSubClasses || p.rows() != y_a.size())
    throw UsageError("teacher_forcing_loss: expected batch x 4 probabilities");
  LossValue out;
  out.grad = nn::Mat::Zero(p.rows(), p.cols());
  const double n = static_cast<double>(p.rows());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index arg;
    double pa = p.row(r).maxCoeff(&arg);
    double diff = pa - y_a[r];
    out.value += diff * diff / n;
    out.grad(r, arg) = 2.0 * diff / n;
  }
  return out;
}

inline double teacher_forcing_loss(const nn::Mat& p, const Eigen::VectorXd& y_a) {
  return teacher_forcing_with_grad(p, y_a).value;
}

inline double combined_loss(double l1, double l2, const LossMix& mix = {}) {
  return mix.weighted_bce * l1 + mix.teacher_forcing * l2;
}

/// Setup A: plain BCE on the single misogyny output. Setup B: the weighted
/// BCE / teacher forcing mix over the four sub-class outputs.
inline LossValue task_loss(Setup setup, const nn::Mat& p, const nn::Mat& y_b,
                           const Eigen::VectorXd& y_a, const LossWeights& w,
                           const LossMix& mix) {
  if (setup == Setup::A) {
    if (p.cols() != 1) throw UsageError("Setup A expects a single output");
    return bce_with_grad(p, y_a);
  }
  LossValue l1 = weighted_bce_with_grad(p, y_b, w);
  LossValue l2 = teacher_forcing_with_grad(p, y_a);
  LossValue out;
  out.value = combined_loss(l1.value, l2.value, mix);
  out.grad = mix.weighted_bce * l1.grad + mix.teacher_forcing * l2.grad;
  return out;
}

inline Eigen::Index output_dim(Setup s) { return s == Setup::A ? 1 : kNumSubClasses; }

}  // namespace gcanfuse
