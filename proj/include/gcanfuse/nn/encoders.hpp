#pragma once

#include <string>
#include <vector>

#include "../image.hpp"
#include "../preprocess.hpp"
#include "attention.hpp"
#include "layers.hpp"
#include "parameter.hpp"

namespace gcanfuse::nn {

/// Class probabilities p in (0,1)^n and the classification feature f.
struct ModelOutput {
  RowVec p;
  RowVec f;
};

enum class Pooling { Cls, Sum };

/// Token sequence plus optional sequence-aligned adjacency (empty = none).
struct TextInput {
  TokenIdSequence seq;
  Mat adjacency;
};

struct TokenEncoderConfig {
  Eigen::Index vocab_size = 0;
  Eigen::Index seq_len = 24;
  AttentionConfig attention;
  Eigen::Index n_classes = 4;
  double dropout = 0.5;
  Pooling pooling = Pooling::Cls;
};

/// Token embeddings + sinusoidal positions -> GCAN layer stack -> pooling ->
/// classifier head. With Pooling::Cls and no adjacency this is the plain
/// transformer text classifier; with Pooling::Sum and a document adjacency it
/// is the graph convolutional attention network.
class TokenEncoder {
 public:
  TokenEncoder() = default;
  TokenEncoder(const TokenEncoderConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    Rng rng(seed);
    embedding_ = Embedding("embedding", cfg.vocab_size, cfg.attention.d_att, rng);
    stack_ = EncoderStack("encoder", cfg.attention, rng);
    head_ = ClassifierHead("head", cfg.attention.d_att, cfg.n_classes, cfg.dropout, rng);
    positions_ = sinusoidal_positions(cfg.seq_len, cfg.attention.d_att);
    // A sum over L_S rows is roughly L_S times larger than a single row;
    // shrink the first head layer so the head starts out of saturation.
    if (cfg.pooling == Pooling::Sum)
      head_.hidden().weight.value /= static_cast<double>(cfg.seq_len);
  }

  ModelOutput forward(const TokenIdSequence& seq, const Mat* adjacency, bool train) {
    if (static_cast<Eigen::Index>(seq.size()) != cfg_.seq_len)
      throw UsageError("TokenEncoder: sequence length mismatch");
    Mat x = embedding_.forward(seq.ids) + positions_;
    hidden_ = stack_.forward(x, adjacency);
    require_finite(hidden_, "token encoder");
    ModelOutput out;
    out.f = cfg_.pooling == Pooling::Cls ? RowVec(hidden_.row(0))
                                         : RowVec(hidden_.colwise().sum());
    out.p = head_.forward(out.f, train, dropout_rng_);
    return out;
  }

  ModelOutput forward(const TextInput& in, bool train) {
    return forward(in.seq, in.adjacency.size() ? &in.adjacency : nullptr, train);
  }

  void backward(const RowVec& dp) {
    RowVec df = head_.backward(dp);
    Mat dh = Mat::Zero(hidden_.rows(), hidden_.cols());
    if (cfg_.pooling == Pooling::Cls)
      dh.row(0) = df;
    else
      dh.rowwise() = df;
    embedding_.backward(stack_.backward(dh));
  }

  ParamRefs parameters() {
    ParamRefs out;
    embedding_.collect(out);
    stack_.collect(out);
    head_.collect(out);
    return out;
  }

  /// L_S x d_att representation of the last forward pass.
  const Mat& hidden() const { return hidden_; }
  const TokenEncoderConfig& config() const { return cfg_; }
  void set_pooling(Pooling p) { cfg_.pooling = p; }
  void seed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  EncoderStack& stack() { return stack_; }
  ClassifierHead& head() { return head_; }

 private:
  TokenEncoderConfig cfg_;
  Rng dropout_rng_;
  Embedding embedding_;
  EncoderStack stack_;
  ClassifierHead head_;
  Mat positions_;
  Mat hidden_;
};

struct ImageEncoderConfig {
  std::size_t image_side = 32;
  std::size_t patch = 8;
  AttentionConfig attention;
  Eigen::Index n_classes = 4;
  double dropout = 0.5;

  std::size_t patches_per_side() const { return image_side / patch; }
  std::size_t n_patches() const { return patches_per_side() * patches_per_side(); }
  Eigen::Index patch_dim() const { return static_cast<Eigen::Index>(3 * patch * patch); }
};

/// Rows are patches in raster order; each row lists channel, then patch row,
/// then patch column.
inline Mat extract_patches(const ImageTensor& img, std::size_t patch) {
  if (patch == 0 || img.side % patch != 0)
    throw UsageError("extract_patches: patch size must divide the image side");
  const std::size_t per_side = img.side / patch;
  Mat out(static_cast<Eigen::Index>(per_side * per_side),
          static_cast<Eigen::Index>(3 * patch * patch));
  for (std::size_t py = 0; py < per_side; ++py)
    for (std::size_t px = 0; px < per_side; ++px) {
      Eigen::Index r = static_cast<Eigen::Index>(py * per_side + px);
      Eigen::Index col = 0;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < patch; ++y)
          for (std::size_t x = 0; x < patch; ++x)
            out(r, col++) = img.at(c, py * patch + y, px * patch + x);
    }
  return out;
}

/// Patch projection + learned [cls] row + sinusoidal positions -> layer
/// stack without adjacency -> [cls] feature -> classifier head.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const ImageEncoderConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    if (cfg.patch == 0 || cfg.image_side % cfg.patch != 0)
      throw UsageError("ImageEncoder: patch size must divide the image side");
    Rng rng(seed);
    projection_ = Linear("patch_proj", cfg.patch_dim(), cfg.attention.d_att, rng);
    cls_ = Parameter("cls_token", 1, cfg.attention.d_att);
    init_normal(cls_.value, 1.0, rng);
    stack_ = EncoderStack("encoder", cfg.attention, rng);
    head_ = ClassifierHead("head", cfg.attention.d_att, cfg.n_classes, cfg.dropout, rng);
    positions_ = sinusoidal_positions(static_cast<Eigen::Index>(cfg.n_patches() + 1),
                                      cfg.attention.d_att);
  }

  Eigen::Index sequence_length() const {
    return static_cast<Eigen::Index>(cfg_.n_patches() + 1);
  }

  ModelOutput forward(const ImageTensor& img, bool train) {
    if (img.side != cfg_.image_side) throw UsageError("ImageEncoder: image size mismatch");
    Mat tokens = projection_.forward(extract_patches(img, cfg_.patch));
    Mat x(tokens.rows() + 1, tokens.cols());
    x.row(0) = cls_.value.row(0);
    x.bottomRows(tokens.rows()) = tokens;
    x += positions_;
    hidden_ = stack_.forward(x, nullptr);
    require_finite(hidden_, "image encoder");
    ModelOutput out;
    out.f = hidden_.row(0);
    out.p = head_.forward(out.f, train, dropout_rng_);
    return out;
  }

  void backward(const RowVec& dp) {
    RowVec df = head_.backward(dp);
    Mat dh = Mat::Zero(hidden_.rows(), hidden_.cols());
    dh.row(0) = df;
    Mat dx = stack_.backward(dh);
    cls_.grad.row(0) += dx.row(0);
    projection_.backward(dx.bottomRows(dx.rows() - 1));
  }

  ParamRefs parameters() {
    ParamRefs out;
    projection_.collect(out);
    out.push_back(&cls_);
    stack_.collect(out);
    head_.collect(out);
    return out;
  }

  const Mat& hidden() const { return hidden_; }
  const ImageEncoderConfig& config() const { return cfg_; }
  void seed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  ClassifierHead& head() { return head_; }

 private:
  ImageEncoderConfig cfg_;
  Rng dropout_rng_;
  Linear projection_;
  Parameter cls_;
  EncoderStack stack_;
  ClassifierHead head_;
  Mat positions_;
  Mat hidden_;
};

}  // namespace gcanfuse::nn
