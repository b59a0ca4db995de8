#pragma once

#include <cstdint>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "keyvalue.hpp"
#include "training/losses.hpp"
#include "training/trainer.hpp"

namespace gcanfuse {

/// Everything a pipeline run needs. Training hyperparameters default to the
/// full-scale fine-tuning values; architecture sizes default to
/// the desk-scale toy encoders.
struct RunConfig {
  std::string dataset;
  std::string test_dataset;
  std::string output_dir;
  std::string model = "gcan";
  Setup setup = Setup::B;

  // Uni-modal training.
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double lr = 2e-5;
  std::size_t warmup_epochs = 4;
  double dropout = 0.5;
  std::size_t patience = 4;
  double mix_weighted_bce = 0.7;
  double mix_teacher_forcing = 0.3;
  double weight_decay = 0.01;

  // Fusion training.
  std::size_t fusion_epochs = 50;
  std::size_t fusion_batch_size = 32;
  double fusion_lr = 5e-6;
  std::size_t fusion_warmup_epochs = 4;

  // Text graph and encoders.
  std::size_t window_len = 10;
  std::size_t seq_len = 24;
  std::size_t min_freq = 1;
  std::size_t resize = 36;
  std::size_t crop = 32;
  std::size_t patch = 8;
  std::size_t d_att = 32;
  std::size_t heads = 4;
  std::size_t layers = 3;

  std::uint64_t seed = 2022;
  std::size_t folds = 10;
  std::size_t jobs = 1;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  TrainConfig unimodal_train(std::size_t fold) const {
    TrainConfig t;
    t.setup = setup;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.base_lr = lr;
    t.warmup_epochs = warmup_epochs;
    t.dropout = dropout;
    t.patience = patience;
    t.mix = {mix_weighted_bce, mix_teacher_forcing};
    t.weight_decay = weight_decay;
    t.seed = seed + fold;
    return t;
  }

  TrainConfig fusion_train(std::size_t fold) const {
    TrainConfig t = unimodal_train(fold);
    t.epochs = fusion_epochs;
    t.batch_size = fusion_batch_size;
    t.base_lr = fusion_lr;
    t.warmup_epochs = fusion_warmup_epochs;
    return t;
  }

  nn::AttentionConfig attention() const {
    return {static_cast<Eigen::Index>(d_att), static_cast<Eigen::Index>(heads), layers};
  }

  static RunConfig from(const KeyValues& kv) {
    RunConfig c;
    c.dataset = kv.get("dataset", c.dataset);
    c.test_dataset = kv.get("test_dataset", c.test_dataset);
    c.output_dir = kv.get("output_dir", c.output_dir);
    c.model = kv.get("model", c.model);
    std::string s = kv.get("setup", std::string(c.setup == Setup::A ? "A" : "B"));
    if (s != "A" && s != "B") throw UsageError("setup must be A or B");
    c.setup = s == "A" ? Setup::A : Setup::B;
    c.epochs = kv.get_size("epochs", c.epochs);
    c.batch_size = kv.get_size("batch_size", c.batch_size);
    c.lr = kv.get("lr", c.lr);
    c.warmup_epochs = kv.get_size("warmup_epochs", c.warmup_epochs);
    c.dropout = kv.get("dropout", c.dropout);
    c.patience = kv.get_size("patience", c.patience);
    c.mix_weighted_bce = kv.get("mix_weighted_bce", c.mix_weighted_bce);
    c.mix_teacher_forcing = kv.get("mix_teacher_forcing", c.mix_teacher_forcing);
    c.weight_decay = kv.get("weight_decay", c.weight_decay);
    c.fusion_epochs = kv.get_size("fusion_epochs", c.fusion_epochs);
    c.fusion_batch_size = kv.get_size("fusion_batch_size", c.fusion_batch_size);
    c.fusion_lr = kv.get("fusion_lr", c.fusion_lr);
    c.fusion_warmup_epochs = kv.get_size("fusion_warmup_epochs", c.fusion_warmup_epochs);
    c.window_len = kv.get_size("window_len", c.window_len);
    c.seq_len = kv.get_size("seq_len", c.seq_len);
    c.min_freq = kv.get_size("min_freq", c.min_freq);
    c.resize = kv.get_size("resize", c.resize);
    c.crop = kv.get_size("crop", c.crop);
    c.patch = kv.get_size("patch", c.patch);
    c.d_att = kv.get_size("d_att", c.d_att);
    c.heads = kv.get_size("heads", c.heads);
    c.layers = kv.get_size("layers", c.layers);
    c.seed = kv.get("seed", c.seed);
    c.folds = kv.get_size("folds", c.folds);
    c.jobs = kv.get_size("jobs", c.jobs);
    return c;
  }

  static RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return from(KeyValues::parse(in));
  }

  std::string emit() const {
    std::ostringstream o;
    auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
    auto num = [&](const char* k, double v) { kv(k, format_double(v)); };
    auto cnt = [&](const char* k, std::uint64_t v) { kv(k, std::to_string(v)); };
    o << "# gcanfuse run configuration\n";
    kv("dataset", dataset);
    kv("test_dataset", test_dataset);
    kv("output_dir", output_dir);
    kv("model", model);
    kv("setup", setup == Setup::A ? "A" : "B");
    cnt("epochs", epochs);
    cnt("batch_size", batch_size);
    num("lr", lr);
    cnt("warmup_epochs", warmup_epochs);
    num("dropout", dropout);
    cnt("patience", patience);
    num("mix_weighted_bce", mix_weighted_bce);
    num("mix_teacher_forcing", mix_teacher_forcing);
    num("weight_decay", weight_decay);
    cnt("fusion_epochs", fusion_epochs);
    cnt("fusion_batch_size", fusion_batch_size);
    num("fusion_lr", fusion_lr);
    cnt("fusion_warmup_epochs", fusion_warmup_epochs);
    cnt("window_len", window_len);
    cnt("seq_len", seq_len);
    cnt("min_freq", min_freq);
    cnt("resize", resize);
    cnt("crop", crop);
    cnt("patch", patch);
    cnt("d_att", d_att);
    cnt("heads", heads);
    cnt("layers", layers);
    cnt("seed", seed);
    cnt("folds", folds);
    cnt("jobs", jobs);
    return o.str();
  }
};

}  // namespace gcanfuse
