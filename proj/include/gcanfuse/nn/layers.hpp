#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "../preprocess.hpp"
#include "parameter.hpp"

namespace gcanfuse::nn {

/// y = x W^T + b, one row per input vector.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, Eigen::Index in, Eigen::Index out, Rng& rng)
      : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {
    init_normal(weight.value, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  }

  Eigen::Index in_features() const { return weight.value.cols(); }
  Eigen::Index out_features() const { return weight.value.rows(); }

  Mat forward(const Mat& x) {
    if (x.cols() != in_features()) throw UsageError("Linear: shape mismatch");
    input_ = x;
    Mat y = x * weight.value.transpose();
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Mat backward(const Mat& dy) {
    weight.grad.noalias() += dy.transpose() * input_;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value;
  }

  void collect(ParamRefs& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Parameter weight;
  Parameter bias;

 private:
  Mat input_;
};

/// Row-wise layer normalization with learned gain and shift.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(std::string name, Eigen::Index dim, double eps = 1e-5)
      : gain(name + ".gain", 1, dim), shift(name + ".shift", 1, dim), eps_(eps) {
    gain.value.setOnes();
  }

  Mat forward(const Mat& x) {
    const Eigen::Index n = x.rows(), d = x.cols();
    xhat_.resize(n, d);
    inv_std_.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      double mean = x.row(r).mean();
      double var = (x.row(r).array() - mean).square().mean();
      inv_std_[r] = 1.0 / std::sqrt(var + eps_);
      xhat_.row(r) = (x.row(r).array() - mean) * inv_std_[r];
    }
    Mat y = xhat_.array().rowwise() * gain.value.row(0).array();
    y.rowwise() += shift.value.row(0);
    return y;
  }

  Mat backward(const Mat& dy) {
    const Eigen::Index n = dy.rows();
    const double d = static_cast<double>(dy.cols());
    gain.grad.row(0) += (dy.array() * xhat_.array()).matrix().colwise().sum();
    shift.grad.row(0) += dy.colwise().sum();
    Mat dxhat = dy.array().rowwise() * gain.value.row(0).array();
    Mat dx(n, dy.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      double s1 = dxhat.row(r).sum();
      double s2 = dxhat.row(r).dot(xhat_.row(r));
      dx.row(r) = (inv_std_[r] / d) *
                  (d * dxhat.row(r).array() - s1 - xhat_.row(r).array() * s2).matrix();
    }
    return dx;
  }

  void collect(ParamRefs& out) {
    out.push_back(&gain);
    out.push_back(&shift);
  }

  Parameter gain;
  Parameter shift;

 private:
  double eps_ = 1e-5;
  Mat xhat_;
  Eigen::VectorXd inv_std_;
};

/// Token id -> row lookup.
class Embedding {
 public:
  Embedding() = default;
  Embedding(std::string name, Eigen::Index vocab, Eigen::Index dim, Rng& rng)
      : table(name + ".table", vocab, dim) {
    init_normal(table.value, 1.0, rng);
  }

  Mat forward(const std::vector<TokenId>& ids) {
    ids_ = ids;
    Mat x(static_cast<Eigen::Index>(ids.size()), table.value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto id = static_cast<Eigen::Index>(ids[i]);
      if (id < 0 || id >= table.value.rows()) throw UsageError("Embedding: id out of range");
      x.row(static_cast<Eigen::Index>(i)) = table.value.row(id);
    }
    return x;
  }

  void backward(const Mat& dx) {
    for (std::size_t i = 0; i < ids_.size(); ++i)
      table.grad.row(ids_[i]) += dx.row(static_cast<Eigen::Index>(i));
  }

  void collect(ParamRefs& out) { out.push_back(&table); }

  Parameter table;

 private:
  std::vector<TokenId> ids_;
};

/// Fixed sinusoidal position table: sin on even columns, cos on odd.
inline Mat sinusoidal_positions(Eigen::Index len, Eigen::Index dim) {
  Mat pe(len, dim);
  for (Eigen::Index pos = 0; pos < len; ++pos)
    for (Eigen::Index i = 0; i < dim; ++i) {
      double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) /
                                          static_cast<double>(dim));
      double a = static_cast<double>(pos) / rate;
      pe(pos, i) = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  return pe;
}

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Classifier block: FC to half width, ReLU, dropout, FC to n outputs,
/// sigmoid. Dropout is inverted (kept units scaled by 1 / (1 - rate)) and
/// only active when train is true.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(const std::string& name, Eigen::Index in, Eigen::Index n_out,
                 double dropout, Rng& rng)
      : hidden_(name + ".hidden", in, in / 2, rng),
        output_(name + ".output", in / 2, n_out, rng),
        dropout_(dropout) {
    if (in < 2) throw UsageError("ClassifierHead: input dimension must be >= 2");
  }

  RowVec forward(const RowVec& f, bool train, Rng& rng) {
    Mat h = hidden_.forward(f);
    relu_mask_ = (h.array() > 0).cast<double>().matrix();
    h = h.cwiseProduct(relu_mask_);
    drop_mask_ = Mat::Ones(1, h.cols());
    if (train && dropout_ > 0) {
      std::bernoulli_distribution keep(1.0 - dropout_);
      for (Eigen::Index i = 0; i < h.cols(); ++i)
        drop_mask_(0, i) = keep(rng) ? 1.0 / (1.0 - dropout_) : 0.0;
      h = h.cwiseProduct(drop_mask_);
    }
    Mat z = output_.forward(h);
    p_.resize(z.cols());
    for (Eigen::Index i = 0; i < z.cols(); ++i) p_[i] = sigmoid(z(0, i));
    return p_;
  }

  /// Gradient w.r.t. the probabilities in, gradient w.r.t. f out.
  RowVec backward(const RowVec& dp) {
    Mat dz = (dp.array() * p_.array() * (1.0 - p_.array())).matrix();
    Mat dh = output_.backward(dz);
    dh = dh.cwiseProduct(drop_mask_).cwiseProduct(relu_mask_);
    return hidden_.backward(dh).row(0);
  }

  void collect(ParamRefs& out) {
    hidden_.collect(out);
    output_.collect(out);
  }

  Linear& hidden() { return hidden_; }
  Linear& output() { return output_; }
  double dropout() const { return dropout_; }

 private:
  Linear hidden_;
  Linear output_;
  double dropout_ = 0.5;
  Mat relu_mask_;
  Mat drop_mask_;
  RowVec p_;
};

}  // namespace gcanfuse::nn
