#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "layers.hpp"
#include "parameter.hpp"

namespace gcanfuse::nn {

struct AttentionConfig {
  Eigen::Index d_att = 32;
  Eigen::Index heads = 4;
  std::size_t n_layers = 3;

  Eigen::Index d_k() const { return d_att / heads; }
  void validate() const {
    if (heads <= 0 || d_att <= 0 || d_att % heads != 0)
      throw UsageError("AttentionConfig: heads must divide the attention dimension");
    if (n_layers == 0) throw UsageError("AttentionConfig: at least one layer required");
  }

  static AttentionConfig full_scale() { return {1024, 8, 3}; }
};

/// Row-wise softmax with max subtraction.
inline Mat softmax_rows(const Mat& logits) {
  require_finite(logits, "attention logits");
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// Self-attention heads with Q = K = V = X:
///   alpha_j = softmax((X Wq_j^T)(X Wk_j^T)^T / sqrt(d_k)) (X Wv_j^T)
/// Each projection is d_k x d_att without bias.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, const AttentionConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    cfg.validate();
    const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.d_att));
    for (Eigen::Index j = 0; j < cfg.heads; ++j) {
      std::string h = name + ".head" + std::to_string(j);
      wq.emplace_back(h + ".wq", cfg.d_k(), cfg.d_att);
      wk.emplace_back(h + ".wk", cfg.d_k(), cfg.d_att);
      wv.emplace_back(h + ".wv", cfg.d_k(), cfg.d_att);
      init_normal(wq.back().value, sd, rng);
      init_normal(wk.back().value, sd, rng);
      init_normal(wv.back().value, sd, rng);
    }
  }

  std::vector<Mat> forward(const Mat& x) {
    if (x.cols() != cfg_.d_att) throw UsageError("MultiHeadAttention: shape mismatch");
    x_ = x;
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k()));
    const auto h = static_cast<std::size_t>(cfg_.heads);
    q_.resize(h);
    k_.resize(h);
    v_.resize(h);
    s_.resize(h);
    std::vector<Mat> out(h);
    for (std::size_t j = 0; j < h; ++j) {
      q_[j] = x * wq[j].value.transpose();
      k_[j] = x * wk[j].value.transpose();
      v_[j] = x * wv[j].value.transpose();
      s_[j] = softmax_rows((q_[j] * k_[j].transpose()) * scale);
      out[j] = s_[j] * v_[j];
    }
    return out;
  }

  /// Attention weights of the last forward pass, one L x L matrix per head.
  const std::vector<Mat>& weights() const { return s_; }

  Mat backward(const std::vector<Mat>& dalpha) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k()));
    Mat dx = Mat::Zero(x_.rows(), x_.cols());
    for (std::size_t j = 0; j < dalpha.size(); ++j) {
      Mat dv = s_[j].transpose() * dalpha[j];
      Mat ds = dalpha[j] * v_[j].transpose();
      Mat dlogit(ds.rows(), ds.cols());
      for (Eigen::Index r = 0; r < ds.rows(); ++r) {
        double inner = ds.row(r).dot(s_[j].row(r));
        dlogit.row(r) = (s_[j].row(r).array() * (ds.row(r).array() - inner)).matrix();
      }
      dlogit *= scale;
      Mat dq = dlogit * k_[j];
      Mat dk = dlogit.transpose() * q_[j];
      wq[j].grad.noalias() += dq.transpose() * x_;
      wk[j].grad.noalias() += dk.transpose() * x_;
      wv[j].grad.noalias() += dv.transpose() * x_;
      dx.noalias() += dq * wq[j].value + dk * wk[j].value + dv * wv[j].value;
    }
    return dx;
  }

  void collect(ParamRefs& out) {
    for (std::size_t j = 0; j < wq.size(); ++j) {
      out.push_back(&wq[j]);
      out.push_back(&wk[j]);
      out.push_back(&wv[j]);
    }
  }

  const AttentionConfig& config() const { return cfg_; }

  std::vector<Parameter> wq, wk, wv;

 private:
  AttentionConfig cfg_;
  Mat x_;
  std::vector<Mat> q_, k_, v_, s_;
};

/// One graph convolutional attention layer. Each head output is multiplied
/// by the document adjacency (skipped when none is given), the heads are
/// concatenated (or averaged in the last layer), projected back to d_att,
/// added to the input and layer-normalized:
///   Y = LN(X + FC(combine_j(A alpha_j)))
class GcanLayer {
 public:
  GcanLayer() = default;
  GcanLayer(const std::string& name, const AttentionConfig& cfg, bool is_last, Rng& rng)
      : attention(name + ".attn", cfg, rng),
        projection(name + ".fc", is_last ? cfg.d_k() : cfg.d_att, cfg.d_att, rng),
        norm(name + ".norm", cfg.d_att),
        is_last_(is_last),
        cfg_(cfg) {}

  Mat forward(const Mat& x, const Mat* adjacency) {
    if (adjacency && (adjacency->rows() != x.rows() || adjacency->cols() != x.rows()))
      throw UsageError("GcanLayer: adjacency size does not match sequence length");
    adjacency_ = adjacency ? *adjacency : Mat();
    std::vector<Mat> heads = attention.forward(x);
    if (adjacency)
      for (auto& a : heads) a = (*adjacency) * a;

    const Eigen::Index dk = cfg_.d_k();
    Mat combined;
    if (is_last_) {
      combined = heads[0];
      for (std::size_t j = 1; j < heads.size(); ++j) combined += heads[j];
      combined /= static_cast<double>(heads.size());
    } else {
      combined.resize(x.rows(), cfg_.d_att);
      for (std::size_t j = 0; j < heads.size(); ++j)
        combined.middleCols(static_cast<Eigen::Index>(j) * dk, dk) = heads[j];
    }
    Mat z = projection.forward(combined);
    return norm.forward(x + z);
  }

  Mat backward(const Mat& dy) {
    Mat dsum = norm.backward(dy);
    Mat dcombined = projection.backward(dsum);
    const Eigen::Index dk = cfg_.d_k();
    const auto h = static_cast<std::size_t>(cfg_.heads);
    std::vector<Mat> dheads(h);
    for (std::size_t j = 0; j < h; ++j) {
      dheads[j] = is_last_ ? Mat(dcombined / static_cast<double>(h))
                           : Mat(dcombined.middleCols(static_cast<Eigen::Index>(j) * dk, dk));
      if (adjacency_.size() > 0) dheads[j] = adjacency_.transpose() * dheads[j];
    }
    return dsum + attention.backward(dheads);
  }

  void collect(ParamRefs& out) {
    attention.collect(out);
    projection.collect(out);
    norm.collect(out);
  }

  bool is_last() const { return is_last_; }

  MultiHeadAttention attention;
  Linear projection;
  LayerNorm norm;

 private:
  bool is_last_ = false;
  AttentionConfig cfg_;
  Mat adjacency_;
};

/// n_layers GCAN layers, the last one using head averaging.
class EncoderStack {
 public:
  EncoderStack() = default;
  EncoderStack(const std::string& name, const AttentionConfig& cfg, Rng& rng) {
    cfg.validate();
    for (std::size_t l = 0; l < cfg.n_layers; ++l)
      layers.emplace_back(name + ".layer" + std::to_string(l), cfg, l + 1 == cfg.n_layers,
                          rng);
  }

  Mat forward(const Mat& x, const Mat* adjacency) {
    Mat h = x;
    for (auto& layer : layers) h = layer.forward(h, adjacency);
    return h;
  }

  Mat backward(const Mat& dy) {
    Mat d = dy;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) d = it->backward(d);
    return d;
  }

  void collect(ParamRefs& out) {
    for (auto& l : layers) l.collect(out);
  }

  std::vector<GcanLayer> layers;
};

}  // namespace gcanfuse::nn
