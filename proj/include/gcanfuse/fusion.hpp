#pragma once

#include <string>
#include <vector>

#include "errors.hpp"
#include "nn/encoders.hpp"
#include "nn/layers.hpp"

namespace gcanfuse {

using nn::ModelOutput;
using nn::RowVec;

/// [p_1 | f_1 | ... | p_m | f_m]
inline RowVec concat_outputs(const std::vector<ModelOutput>& outputs) {
  Eigen::Index len = 0;
  for (const auto& o : outputs) len += o.p.size() + o.f.size();
  RowVec out(len);
  Eigen::Index at = 0;
  for (const auto& o : outputs) {
    out.segment(at, o.p.size()) = o.p;
    at += o.p.size();
    out.segment(at, o.f.size()) = o.f;
    at += o.f.size();
  }
  return out;
}

/// Frozen member outputs for one sample.
struct FusionInput {
  std::vector<ModelOutput> outputs;
  RowVec concat;

  explicit FusionInput(std::vector<ModelOutput> members = {})
      : outputs(std::move(members)), concat(concat_outputs(outputs)) {
    if (!outputs.empty() && outputs.size() < 2)
      throw UsageError("FusionInput: at least two member models required");
  }
  std::size_t members() const { return outputs.size(); }
};

/// Sigmoid scores s mapped to the simplex: w_i = s_i / sum_j s_j.
inline RowVec normalize_stream_weights(const RowVec& scores) {
  return scores / scores.sum();
}

/// p_sw[c] = sum_i w_i p_i[c]
inline RowVec stream_weighting(const std::vector<RowVec>& probs, const RowVec& weights) {
  if (probs.empty() || static_cast<Eigen::Index>(probs.size()) != weights.size())
    throw UsageError("stream_weighting: one weight per member required");
  RowVec out = RowVec::Zero(probs[0].size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].size() != out.size())
      throw UsageError("stream_weighting: probability length mismatch");
    out += weights[static_cast<Eigen::Index>(i)] * probs[i];
  }
  return out;
}

inline RowVec fuse(const RowVec& p_sw, const RowVec& p_rf) {
  if (p_sw.size() != p_rf.size()) throw UsageError("fuse: length mismatch");
  return 0.5 * (p_sw + p_rf);
}

struct FusionConfig {
  Eigen::Index input_dim = 0;
  std::size_t members = 2;
  Eigen::Index n_classes = 4;
  double dropout = 0.5;
};

/// Weight predictor (classifier block with m outputs) and representation
/// fusion classifier (classifier block with n outputs) over the concatenated
/// member representation; the final probability averages stream weighting
/// and representation fusion. Member encoders are not part of this model.
class FusionModel {
 public:
  FusionModel() = default;
  FusionModel(const FusionConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    if (cfg.members < 2) throw UsageError("FusionModel: at least two members required");
    nn::Rng rng(seed);
    weight_predictor_ = nn::ClassifierHead("weight_predictor", cfg.input_dim,
                                           static_cast<Eigen::Index>(cfg.members),
                                           cfg.dropout, rng);
    classifier_ = nn::ClassifierHead("fusion_classifier", cfg.input_dim, cfg.n_classes,
                                     cfg.dropout, rng);
  }

  RowVec weight_predictor(const RowVec& concat, bool train) {
    scores_ = weight_predictor_.forward(concat, train, dropout_rng_);
    weights_ = normalize_stream_weights(scores_);
    return weights_;
  }

  RowVec representation_fusion(const RowVec& concat, bool train) {
    p_rf_ = classifier_.forward(concat, train, dropout_rng_);
    return p_rf_;
  }

  ModelOutput forward(const FusionInput& in, bool train) {
    if (in.members() != cfg_.members || in.concat.size() != cfg_.input_dim)
      throw UsageError("FusionModel: input layout does not match configuration");
    member_probs_.clear();
    for (const auto& o : in.outputs) member_probs_.push_back(o.p);
    weight_predictor(in.concat, train);
    p_sw_ = stream_weighting(member_probs_, weights_);
    representation_fusion(in.concat, train);
    ModelOutput out;
    out.p = fuse(p_sw_, p_rf_);
    out.f = in.concat;
    return out;
  }

  void backward(const RowVec& dp) {
    RowVec dsw = 0.5 * dp;
    RowVec drf = 0.5 * dp;
    classifier_.backward(drf);
    // d p_sw / d w_i = p_i; then through w = s / sum(s).
    const auto m = static_cast<Eigen::Index>(member_probs_.size());
    RowVec dw(m);
    for (Eigen::Index i = 0; i < m; ++i) dw[i] = dsw.dot(member_probs_[static_cast<std::size_t>(i)]);
    const double total = scores_.sum();
    const double inner = dw.dot(scores_) / (total * total);
    RowVec ds = (dw.array() / total - inner).matrix();
    weight_predictor_.backward(ds);
  }

  nn::ParamRefs parameters() {
    nn::ParamRefs out;
    weight_predictor_.collect(out);
    classifier_.collect(out);
    return out;
  }

  const FusionConfig& config() const { return cfg_; }
  const RowVec& last_weights() const { return weights_; }
  const RowVec& last_stream_probs() const { return p_sw_; }
  const RowVec& last_fusion_probs() const { return p_rf_; }
  void seed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  nn::ClassifierHead& weight_head() { return weight_predictor_; }
  nn::ClassifierHead& classifier_head() { return classifier_; }

 private:
  FusionConfig cfg_;
  nn::Rng dropout_rng_;
  nn::ClassifierHead weight_predictor_;
  nn::ClassifierHead classifier_;
  RowVec scores_, weights_, p_sw_, p_rf_;
  std::vector<RowVec> member_probs_;
};

}  // namespace gcanfuse
