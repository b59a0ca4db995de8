#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "../errors.hpp"

namespace gcanfuse::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Rng = std::mt19937_64;

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

using ParamRefs = std::vector<Parameter*>;

inline void zero_grads(const ParamRefs& ps) {
  for (auto* p : ps) p->zero_grad();
}

inline std::size_t parameter_count(const ParamRefs& ps) {
  std::size_t n = 0;
  for (auto* p : ps) n += static_cast<std::size_t>(p->value.size());
  return n;
}

inline void init_normal(Mat& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* where) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + where);
}

}  // namespace gcanfuse::nn
