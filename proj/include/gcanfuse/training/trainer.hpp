#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "../ensemble/metrics.hpp"
#include "../errors.hpp"
#include "../nn/checkpoint.hpp"
#include "../nn/encoders.hpp"
#include "losses.hpp"
#include "optimizer.hpp"

namespace gcanfuse {

struct TrainConfig {
  Setup setup = Setup::B;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double base_lr = 2e-5;
  std::size_t warmup_epochs = 4;
  double dropout = 0.5;
  std::size_t patience = 4;
  LossMix mix;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0 || batch_size == 0 || patience == 0 || !(base_lr > 0))
      throw UsageError("TrainConfig: epochs, batch size, patience and lr must be positive");
    if (warmup_epochs >= epochs) throw UsageError("TrainConfig: warm-up must be shorter than training");
    if (dropout < 0 || dropout >= 1) throw UsageError("TrainConfig: dropout must be in [0,1)");
  }

  static TrainConfig reference_unimodal() { return {}; }
  static TrainConfig reference_fusion() {
    TrainConfig c;
    c.batch_size = 32;
    c.base_lr = 5e-6;
    return c;
  }
};

inline LrSchedule make_schedule(const TrainConfig& cfg, std::size_t steps_per_epoch) {
  return {cfg.base_lr, cfg.warmup_epochs * steps_per_epoch, cfg.epochs * steps_per_epoch};
}

/// Supervision for one sample: sub-class targets (Setup B) or [mis] (Setup A),
/// plus the binary misogyny target.
struct Target {
  nn::RowVec y;
  double mis = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_f1 = 0;
  double lr = 0;
};

/// Stops once `patience` consecutive epochs fail to strictly exceed the best
/// F1 seen so far. Ties do not reset the counter.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when training should stop after this epoch.
  bool update(double f1) {
    if (f1 > best_) {
      best_ = f1;
      stale_ = 0;
    } else {
      ++stale_;
    }
    return stale_ >= patience_;
  }

  double best() const { return best_; }

 private:
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

/// Indices of the (at most) two highest F1 values, earliest first on ties.
inline std::vector<std::size_t> top_two_epochs(const std::vector<double>& f1) {
  std::vector<std::size_t> idx(f1.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return f1[a] > f1[b]; });
  if (idx.size() > 2) idx.resize(2);
  return idx;
}

/// Replays the stopping rule on a scripted validation trace; returns the
/// number of epochs that would run.
inline std::size_t epochs_until_stop(const std::vector<double>& trace, std::size_t patience) {
  EarlyStopping stop(patience);
  for (std::size_t e = 0; e < trace.size(); ++e)
    if (stop.update(trace[e])) return e + 1;
  return trace.size();
}

/// Validation score: macro-F1 over {noMis, Mis} for Setup A, weighted-F1
/// over the four sub-labels for Setup B.
inline double validation_f1(Setup setup, const ProbMatrix& p, const LabelMatrix& truth) {
  F1Report r = f1_scores(threshold(p), truth);
  return setup == Setup::A ? r.macro_f1 : r.weighted_f1;
}

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_f1 = 0;
  std::vector<std::size_t> averaged_epochs;  // 1-based
  nn::Checkpoint checkpoint;
};

template <class Model, class Input>
ProbMatrix predict(Model& model, const std::vector<Input>& inputs,
                   const std::vector<std::size_t>& idx) {
  ProbMatrix p;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    nn::ModelOutput out = model.forward(inputs[idx[r]], false);
    if (r == 0) p.resize(static_cast<Eigen::Index>(idx.size()), out.p.size());
    p.row(static_cast<Eigen::Index>(r)) = out.p;
  }
  return p;
}

template <class Model, class Input>
std::vector<nn::ModelOutput> model_outputs(Model& model, const std::vector<Input>& inputs) {
  std::vector<nn::ModelOutput> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(model.forward(in, false));
  return out;
}

inline LabelMatrix target_labels(const std::vector<Target>& targets,
                                 const std::vector<std::size_t>& idx) {
  if (idx.empty()) return {};
  LabelMatrix m(static_cast<Eigen::Index>(idx.size()), targets[idx[0]].y.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(static_cast<Eigen::Index>(r), c) = targets[idx[r]].y[c] >= 0.5 ? 1 : 0;
  return m;
}

/// Per-sample loss; batch means decompose into per-sample terms scaled by
/// 1 / batch, so gradients can be pushed through one sample at a time.
inline LossValue sample_loss(const TrainConfig& cfg, const nn::RowVec& p, const Target& t,
                             const LossWeights& w) {
  nn::Mat pm = p;
  nn::Mat ym = t.y;
  Eigen::VectorXd ya(1);
  ya[0] = t.mis;
  return task_loss(cfg.setup, pm, ym, ya, w, cfg.mix);
}

/// Seeded mini-batch AdamW training with warm-up/decay schedule, early
/// stopping on validation F1 and a final average of the two best epochs.
template <class Model, class Input>
TrainResult train_model(Model& model, const std::vector<Input>& inputs,
                        const std::vector<Target>& targets,
                        const std::vector<std::size_t>& train_idx,
                        const std::vector<std::size_t>& val_idx, const TrainConfig& cfg,
                        const LossWeights& weights, std::ostream* log = nullptr,
                        std::size_t fold = 0) {
  cfg.validate();
  if (train_idx.empty() || val_idx.empty()) throw DataError("train_model: empty fold");

  nn::ParamRefs params = model.parameters();
  AdamW opt(AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
  const std::size_t steps_per_epoch = (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;
  const LrSchedule schedule = make_schedule(cfg, steps_per_epoch);
  std::mt19937_64 shuffle_rng(cfg.seed);
  model.seed_dropout(cfg.seed + 1);
  const LabelMatrix val_truth = target_labels(targets, val_idx);

  TrainResult result;
  EarlyStopping stopper(cfg.patience);
  std::vector<double> f1_trace;
  // Best two snapshots, ordered by (F1 desc, epoch asc).
  std::vector<std::pair<std::size_t, nn::Checkpoint>> best;
  std::size_t step = 0;
  std::vector<std::size_t> order = train_idx;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    double lr = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      nn::zero_grads(params);
      for (std::size_t k = start; k < end; ++k) {
        nn::ModelOutput out = model.forward(inputs[order[k]], true);
        LossValue lv = sample_loss(cfg, out.p, targets[order[k]], weights);
        loss_sum += lv.value;
        model.backward(nn::RowVec(lv.grad.row(0) * scale));
      }
      lr = lr_at(step, schedule);
      opt.step(params, lr);
      ++step;
    }
    if (!std::isfinite(loss_sum)) throw NumericError("train_model: non-finite training loss");

    ProbMatrix val_p = predict(model, inputs, val_idx);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()),
                    validation_f1(cfg.setup, val_p, val_truth), lr};
    result.history.push_back(rec);
    f1_trace.push_back(rec.val_f1);
    if (log)
      *log << fold << '\t' << epoch << '\t' << rec.train_loss << '\t' << rec.val_f1 << '\t'
           << rec.lr << '\n';

    best.emplace_back(epoch, nn::snapshot(params));
    std::stable_sort(best.begin(), best.end(), [&](const auto& a, const auto& b) {
      return f1_trace[a.first - 1] > f1_trace[b.first - 1];
    });
    if (best.size() > 2) best.pop_back();

    if (stopper.update(rec.val_f1)) break;
  }

  result.best_f1 = stopper.best();
  for (const auto& [e, c] : best) result.averaged_epochs.push_back(e);
  result.checkpoint = best.size() == 2 ? nn::average_checkpoints(best[0].second, best[1].second)
                                       : best[0].second;
  nn::restore(params, result.checkpoint);
  return result;
}

}  // namespace gcanfuse
