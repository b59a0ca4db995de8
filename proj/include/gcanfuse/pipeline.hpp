#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "data/dataset.hpp"
#include "ensemble/kfold.hpp"
#include "ensemble/metrics.hpp"
#include "ensemble/predictions.hpp"
#include "ensemble/voting.hpp"
#include "errors.hpp"
#include "fusion.hpp"
#include "hash.hpp"
#include "image.hpp"
#include "nn/checkpoint.hpp"
#include "nn/encoders.hpp"
#include "preprocess.hpp"
#include "text_graph.hpp"
#include "training/trainer.hpp"

namespace gcanfuse {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Model catalogue
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& unimodal_models() {
  static const std::vector<std::string> names{"bertc", "gcan", "vit"};
  return names;
}

inline const std::vector<std::string>& all_models() {
  static const std::vector<std::string> names{"bertc",     "gcan",       "vit",
                                              "bertc-vit", "gcan-vit",   "bertc-gcan",
                                              "bertc-gcan-vit"};
  return names;
}

/// Members of a fusion model in concatenation order; empty for uni-modal.
inline std::vector<std::string> model_members(const std::string& name) {
  if (name == "bertc" || name == "gcan" || name == "vit") return {};
  if (name == "bertc-vit") return {"bertc", "vit"};
  if (name == "gcan-vit") return {"gcan", "vit"};
  if (name == "bertc-gcan") return {"bertc", "gcan"};
  if (name == "bertc-gcan-vit") return {"bertc", "gcan", "vit"};
  throw UsageError("unknown model '" + name +
                   "' (expected bertc, gcan, vit, bertc-vit, gcan-vit, bertc-gcan, bertc-gcan-vit)");
}

inline bool is_fusion(const std::string& name) { return !model_members(name).empty(); }

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

/// Cleaned OCR text merged with the cleaned captions.
inline std::string document_text(const RawSample& s) {
  std::vector<std::string> caps;
  for (const auto& c : s.captions) caps.push_back(clean_text(c));
  return combine_texts(clean_text(s.ocr_text), caps);
}

inline std::vector<TokenId> to_ids(const std::vector<std::string>& tokens, const Vocabulary& v) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(v.id(t));
  return ids;
}

inline std::vector<Target> make_targets(const std::vector<RawSample>& samples, Setup setup) {
  std::vector<Target> out;
  for (const auto& s : samples) {
    Target t;
    t.mis = s.labels.mis;
    if (setup == Setup::A) {
      t.y = nn::RowVec::Constant(1, s.labels.mis);
    } else {
      t.y.resize(4);
      for (int c = 0; c < 4; ++c) t.y[c] = s.labels.sub[c];
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// Everything derived from the raw train/test samples: vocabulary and corpus
/// graph (training documents only), encoded sequences with and without
/// document adjacency, standardized images and targets.
struct Workspace {
  RunConfig cfg;
  std::vector<RawSample> train, test;
  Vocabulary vocab;
  CorpusGraph graph;
  std::vector<nn::TextInput> plain_train, plain_test;
  std::vector<nn::TextInput> graph_train, graph_test;
  std::vector<ImageTensor> image_train, image_test;
  std::vector<Target> targets_train, targets_test;
};

inline Workspace build_workspace(const RunConfig& cfg, std::vector<RawSample> train,
                                 std::vector<RawSample> test = {}) {
  if (train.empty()) throw DataError("empty training set");
  Workspace ws;
  ws.cfg = cfg;
  ws.train = std::move(train);
  ws.test = std::move(test);

  std::vector<std::vector<std::string>> train_tokens, test_tokens;
  for (const auto& s : ws.train) train_tokens.push_back(tokenize(document_text(s)));
  for (const auto& s : ws.test) test_tokens.push_back(tokenize(document_text(s)));

  ws.vocab = build_vocabulary(train_tokens, cfg.min_freq);
  std::vector<std::vector<TokenId>> corpus;
  for (const auto& t : train_tokens) corpus.push_back(to_ids(t, ws.vocab));
  ws.graph = build_adjacency(corpus, count_windows(corpus, cfg.window_len), ws.vocab);

  for (std::size_t i = 0; i < ws.train.size(); ++i) {
    nn::TextInput in{encode_document(train_tokens[i], ws.vocab, cfg.seq_len), {}};
    ws.plain_train.push_back(in);
    in.adjacency = extract_document_adjacency(ws.graph, i, in.seq).matrix;
    ws.graph_train.push_back(std::move(in));
    ws.image_train.push_back(normalize_image(ws.train[i].image, cfg.resize, cfg.crop));
  }
  for (std::size_t i = 0; i < ws.test.size(); ++i) {
    nn::TextInput in{encode_document(test_tokens[i], ws.vocab, cfg.seq_len), {}};
    ws.plain_test.push_back(in);
    in.adjacency =
        extract_unseen_document_adjacency(ws.graph, to_ids(test_tokens[i], ws.vocab), in.seq)
            .matrix;
    ws.graph_test.push_back(std::move(in));
    ws.image_test.push_back(normalize_image(ws.test[i].image, cfg.resize, cfg.crop));
  }
  ws.targets_train = make_targets(ws.train, cfg.setup);
  ws.targets_test = make_targets(ws.test, cfg.setup);
  return ws;
}

// ---------------------------------------------------------------------------
// Model construction and inference
// ---------------------------------------------------------------------------

inline nn::TokenEncoder make_text_model(const Workspace& ws, bool graph, std::uint64_t seed) {
  nn::TokenEncoderConfig c;
  c.vocab_size = static_cast<Eigen::Index>(ws.vocab.size());
  c.seq_len = static_cast<Eigen::Index>(ws.cfg.seq_len);
  c.attention = ws.cfg.attention();
  c.n_classes = output_dim(ws.cfg.setup);
  c.dropout = ws.cfg.dropout;
  c.pooling = graph ? nn::Pooling::Sum : nn::Pooling::Cls;
  return nn::TokenEncoder(c, seed);
}

inline nn::ImageEncoder make_image_model(const Workspace& ws, std::uint64_t seed) {
  nn::ImageEncoderConfig c;
  c.image_side = ws.cfg.crop;
  c.patch = ws.cfg.patch;
  c.attention = ws.cfg.attention();
  c.n_classes = output_dim(ws.cfg.setup);
  c.dropout = ws.cfg.dropout;
  return nn::ImageEncoder(c, seed);
}

inline FusionModel make_fusion_model(const Workspace& ws, std::size_t members,
                                     std::uint64_t seed) {
  FusionConfig c;
  c.members = members;
  c.n_classes = output_dim(ws.cfg.setup);
  c.input_dim = static_cast<Eigen::Index>(members) *
                (c.n_classes + static_cast<Eigen::Index>(ws.cfg.d_att));
  c.dropout = ws.cfg.dropout;
  return FusionModel(c, seed);
}

/// Eval-mode outputs of a trained uni-modal model on the train or test split.
inline std::vector<nn::ModelOutput> unimodal_outputs(const Workspace& ws, const std::string& name,
                                                     const nn::Checkpoint& ckpt, bool test) {
  if (name == "vit") {
    auto m = make_image_model(ws, 0);
    nn::restore(m.parameters(), ckpt);
    return model_outputs(m, test ? ws.image_test : ws.image_train);
  }
  const bool graph = name == "gcan";
  if (!graph && name != "bertc") throw UsageError("not a uni-modal model: " + name);
  auto m = make_text_model(ws, graph, 0);
  nn::restore(m.parameters(), ckpt);
  if (graph) return model_outputs(m, test ? ws.graph_test : ws.graph_train);
  return model_outputs(m, test ? ws.plain_test : ws.plain_train);
}

inline std::vector<FusionInput> fusion_inputs(const std::vector<std::vector<nn::ModelOutput>>& per_member) {
  std::vector<FusionInput> out;
  const std::size_t n = per_member.at(0).size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<nn::ModelOutput> row;
    for (const auto& m : per_member) row.push_back(m.at(i));
    out.emplace_back(std::move(row));
  }
  return out;
}

inline LossWeights fold_loss_weights(const Workspace& ws, const std::vector<std::size_t>& idx) {
  if (ws.cfg.setup == Setup::A) return {};
  std::array<double, 4> counts{};
  for (auto i : idx)
    for (int c = 0; c < 4; ++c) counts[c] += ws.train[i].labels.sub[c];
  return class_weights(counts, static_cast<double>(idx.size()));
}

// ---------------------------------------------------------------------------
// Run directory layout
// ---------------------------------------------------------------------------

inline fs::path model_dir(const fs::path& out, const std::string& model) { return out / model; }
inline fs::path fold_dir(const fs::path& out, const std::string& model, std::size_t fold) {
  return out / model / ("fold_" + std::to_string(fold));
}
inline fs::path checkpoint_path(const fs::path& out, const std::string& model, std::size_t fold) {
  return fold_dir(out, model, fold) / "checkpoint.gfc";
}

/// Adds or replaces manifest rows `file<TAB>role<TAB>hash` (paths relative
/// to dir), keeping rows sorted by file.
inline void update_manifest(const fs::path& dir,
                            const std::vector<std::pair<fs::path, std::string>>& files) {
  std::map<std::string, std::pair<std::string, std::string>> rows;
  const fs::path manifest = dir / "manifest.tsv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string f, role, h;
      if (std::getline(ls, f, '\t') && std::getline(ls, role, '\t') && std::getline(ls, h))
        rows[f] = {role, h};
    }
  }
  for (const auto& [path, role] : files) {
    std::string rel = fs::relative(path, dir).generic_string();
    rows[rel] = {role, file_hash(path.string())};
  }
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw DataError("cannot write " + manifest.string());
  out << "file\trole\thash\n";
  for (const auto& [f, rh] : rows) out << f << '\t' << rh.first << '\t' << rh.second << '\n';
}

// ---------------------------------------------------------------------------
// Cross-validated training
// ---------------------------------------------------------------------------

struct FoldOutcome {
  TrainResult result;
  std::string log;
  std::vector<std::pair<std::string, std::string>> member_hashes;  // name, path|hash
};

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Fails unless every member of a fusion model has all fold checkpoints.
inline void require_members(const fs::path& out, const std::string& model, std::size_t folds) {
  for (const auto& m : model_members(model))
    for (std::size_t f = 0; f < folds; ++f)
      if (!fs::exists(checkpoint_path(out, m, f)))
        throw UsageError("model '" + model + "' needs trained member '" + m +
                         "' (missing " + checkpoint_path(out, m, f).string() +
                         "); train the uni-modal models first");
}

inline FoldOutcome train_one_fold(const Workspace& ws, const std::string& model,
                                  const std::vector<std::vector<std::size_t>>& folds,
                                  std::size_t fold, const fs::path& out) {
  const std::vector<std::size_t> train_idx = complement(folds, fold);
  const std::vector<std::size_t>& val_idx = folds[fold];
  const LossWeights weights = fold_loss_weights(ws, train_idx);
  const std::uint64_t seed = ws.cfg.seed + 1000 * (fold + 1);
  std::ostringstream log;
  log << std::setprecision(10);
  FoldOutcome o;

  if (model == "vit") {
    auto m = make_image_model(ws, seed);
    o.result = train_model(m, ws.image_train, ws.targets_train, train_idx, val_idx,
                           ws.cfg.unimodal_train(fold), weights, &log, fold);
  } else if (model == "bertc" || model == "gcan") {
    const bool graph = model == "gcan";
    auto m = make_text_model(ws, graph, seed);
    o.result = train_model(m, graph ? ws.graph_train : ws.plain_train, ws.targets_train,
                           train_idx, val_idx, ws.cfg.unimodal_train(fold), weights, &log, fold);
  } else {
    const auto members = model_members(model);
    std::vector<std::vector<nn::ModelOutput>> outputs;
    for (const auto& m : members) {
      const fs::path p = checkpoint_path(out, m, fold);
      std::string rel = fs::relative(p, out).generic_string();
      o.member_hashes.emplace_back(m, rel + "|" + file_hash(p.string()));
      outputs.push_back(unimodal_outputs(ws, m, nn::read_checkpoint(p.string()), false));
    }
    auto inputs = fusion_inputs(outputs);
    auto fm = make_fusion_model(ws, members.size(), seed);
    o.result = train_model(fm, inputs, ws.targets_train, train_idx, val_idx,
                           ws.cfg.fusion_train(fold), weights, &log, fold);
    // Members are read-only inputs; their files must be untouched.
    for (std::size_t k = 0; k < members.size(); ++k) {
      const fs::path p = checkpoint_path(out, members[k], fold);
      const std::string& rec = o.member_hashes[k].second;
      if (rec.substr(rec.find('|') + 1) != file_hash(p.string()))
        throw DataError("member checkpoint changed during fusion training: " + p.string());
    }
  }
  o.log = log.str();
  return o;
}

struct TrainSummary {
  std::string model;
  std::vector<double> best_f1;
  std::vector<std::size_t> epochs_run;
};

/// k-fold cross-validated training of one model. Artifacts land in
/// out/<model>/: fold_<j>/checkpoint.gfc, train_log.tsv, runs.tsv and
/// config.txt; vocab.tsv and graph.txg go to out/.
inline TrainSummary train_cross_validated(const RunConfig& cfg, const std::string& model,
                                          const fs::path& out) {
  model_members(model);  // validates the name
  if (cfg.folds < 2) throw UsageError("cross-validation needs at least two folds");
  require_members(out, model, cfg.folds);
  Workspace ws = build_workspace(cfg, ingest(cfg.dataset));
  const auto folds = kfold_split(ws.train.size(), cfg.folds, cfg.seed);

  std::vector<FoldOutcome> outcomes(cfg.folds);
  parallel_for(cfg.folds, cfg.jobs, [&](std::size_t f) {
    outcomes[f] = train_one_fold(ws, model, folds, f, out);
  });

  const fs::path mdir = model_dir(out, model);
  fs::create_directories(mdir);
  std::vector<std::pair<fs::path, std::string>> artifacts;
  TrainSummary summary;
  summary.model = model;
  std::ofstream log(mdir / "train_log.tsv", std::ios::binary);
  log << "fold\tepoch\ttrain_loss\tval_f1\tlr\n";
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    const auto& o = outcomes[f];
    log << o.log;
    nn::Checkpoint ckpt = o.result.checkpoint;
    ckpt.meta = {{"model", model},
                 {"fold", std::to_string(f)},
                 {"setup", cfg.setup == Setup::A ? "A" : "B"},
                 {"best_f1", format_double(o.result.best_f1)},
                 {"epochs_run", std::to_string(o.result.history.size())}};
    std::string avg;
    for (auto e : o.result.averaged_epochs) avg += (avg.empty() ? "" : ",") + std::to_string(e);
    ckpt.meta.emplace_back("averaged_epochs", avg);
    for (const auto& [m, h] : o.member_hashes) ckpt.meta.emplace_back("member_" + m, h);
    fs::create_directories(fold_dir(out, model, f));
    const fs::path cp = checkpoint_path(out, model, f);
    nn::write_checkpoint(cp.string(), ckpt);
    artifacts.emplace_back(cp, "checkpoint");
    summary.best_f1.push_back(o.result.best_f1);
    summary.epochs_run.push_back(o.result.history.size());
  }
  log.close();
  write_fold_scores((mdir / "runs.tsv").string(), summary.best_f1);
  {
    std::ofstream c(mdir / "config.txt", std::ios::binary);
    RunConfig saved = cfg;
    saved.model = model;
    saved.dataset = fs::absolute(cfg.dataset).lexically_normal().string();
    saved.output_dir = fs::absolute(out).lexically_normal().string();
    c << saved.emit();
  }
  ws.vocab.save((out / "vocab.tsv").string());
  write_graph((out / "graph.txg").string(), ws.graph);
  artifacts.emplace_back(mdir / "train_log.tsv", "train_log");
  artifacts.emplace_back(mdir / "runs.tsv", "fold_validation_f1");
  artifacts.emplace_back(mdir / "config.txt", "config");
  artifacts.emplace_back(out / "vocab.tsv", "vocabulary");
  artifacts.emplace_back(out / "graph.txg", "graph");
  update_manifest(out, artifacts);
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct ModelEvaluation {
  std::string model;
  Setup setup = Setup::B;
  std::vector<FoldRun> runs;
  EnsemblePrediction ensemble;
  std::vector<double> fold_taskA_f1;
  double taskA_macro_f1 = 0;     // soft-vote, sub-task A (derived for Setup B)
  double taskB_weighted_f1 = 0;  // soft-vote, Setup B only
  bool or_max_agree = true;      // derived labels == [max p >= 0.5] on every sample
};

inline LabelMatrix mis_truth(const std::vector<RawSample>& samples) {
  LabelMatrix m(static_cast<Eigen::Index>(samples.size()), 1);
  for (std::size_t i = 0; i < samples.size(); ++i)
    m(static_cast<Eigen::Index>(i), 0) = samples[i].labels.mis;
  return m;
}

inline LabelMatrix sub_truth(const std::vector<RawSample>& samples) {
  LabelMatrix m(static_cast<Eigen::Index>(samples.size()), 4);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (int c = 0; c < 4; ++c) m(static_cast<Eigen::Index>(i), c) = samples[i].labels.sub[c];
  return m;
}

inline double taskA_f1(const ProbMatrix& probs, const std::vector<RawSample>& samples) {
  LabelMatrix labels = threshold(probs);
  LabelMatrix mis = probs.cols() == 4 ? derive_taskA(labels) : labels;
  return f1_scores(mis, mis_truth(samples)).macro_f1;
}

/// Test-set probabilities of one trained fold.
inline ProbMatrix fold_test_probs(const Workspace& ws, const fs::path& out,
                                  const std::string& model, std::size_t fold,
                                  nn::Checkpoint* meta_out = nullptr) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(checkpoint_path(out, model, fold).string());
  if (meta_out) *meta_out = ckpt;
  std::vector<nn::ModelOutput> outs;
  const auto members = model_members(model);
  if (members.empty()) {
    outs = unimodal_outputs(ws, model, ckpt, true);
  } else {
    std::vector<std::vector<nn::ModelOutput>> per;
    for (const auto& m : members) {
      const std::string rec = ckpt.meta_value("member_" + m);
      const fs::path p = checkpoint_path(out, m, fold);
      if (!rec.empty() && rec.substr(rec.find('|') + 1) != file_hash(p.string()))
        throw DataError("member checkpoint " + p.string() + " no longer matches the hash recorded by " +
                        model);
      per.push_back(unimodal_outputs(ws, m, nn::read_checkpoint(p.string()), true));
    }
    auto inputs = fusion_inputs(per);
    auto fm = make_fusion_model(ws, members.size(), 0);
    nn::restore(fm.parameters(), ckpt);
    outs = model_outputs(fm, inputs);
  }
  ProbMatrix p(static_cast<Eigen::Index>(outs.size()), outs.at(0).p.size());
  for (std::size_t i = 0; i < outs.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = outs[i].p;
  return p;
}

inline std::vector<std::string> sample_ids(const std::vector<RawSample>& s) {
  std::vector<std::string> ids;
  for (const auto& x : s) ids.push_back(x.id);
  return ids;
}

inline std::size_t count_folds(const fs::path& out, const std::string& model) {
  std::size_t n = 0;
  while (fs::exists(checkpoint_path(out, model, n))) ++n;
  return n;
}

/// Evaluates every fold of `model` on the test set and soft-votes them.
/// Writes fold_<j>/test_probs.tsv, soft_vote.tsv and test_f1.tsv.
inline ModelEvaluation evaluate_model(const fs::path& out, const std::string& model,
                                      const std::vector<RawSample>& test) {
  const fs::path mdir = model_dir(out, model);
  RunConfig cfg = RunConfig::from(KeyValues::parse_file((mdir / "config.txt").string()));
  Workspace ws = build_workspace(cfg, ingest(cfg.dataset), test);
  const std::size_t n_folds = count_folds(out, model);
  if (n_folds == 0) throw DataError("no trained folds for model " + model);

  ModelEvaluation ev;
  ev.model = model;
  ev.setup = cfg.setup;
  std::vector<std::pair<fs::path, std::string>> artifacts;
  const auto ids = sample_ids(ws.test);
  for (std::size_t f = 0; f < n_folds; ++f) {
    nn::Checkpoint ckpt;
    FoldRun run;
    run.model = model;
    run.fold = f;
    run.test_probs = fold_test_probs(ws, out, model, f, &ckpt);
    run.best_f1 = std::stod(ckpt.meta_value("best_f1"));
    const fs::path pp = fold_dir(out, model, f) / "test_probs.tsv";
    write_predictions(pp.string(), {ids, run.test_probs, threshold(run.test_probs)});
    artifacts.emplace_back(pp, "fold_test_predictions");
    ev.fold_taskA_f1.push_back(taskA_f1(run.test_probs, ws.test));
    ev.runs.push_back(std::move(run));
  }
  ev.ensemble = soft_vote(ev.runs);
  ev.taskA_macro_f1 = taskA_f1(ev.ensemble.probs, ws.test);
  if (cfg.setup == Setup::B) {
    ev.taskB_weighted_f1 = f1_scores(ev.ensemble.labels, sub_truth(ws.test)).weighted_f1;
    LabelMatrix by_or = derive_taskA(ev.ensemble.labels);
    LabelMatrix by_max = threshold(derive_taskA(ev.ensemble.probs));
    ev.or_max_agree = by_or == by_max;
  }
  write_predictions((mdir / "soft_vote.tsv").string(),
                    {ids, ev.ensemble.probs, ev.ensemble.labels});
  write_fold_scores((mdir / "test_f1.tsv").string(), ev.fold_taskA_f1);
  artifacts.emplace_back(mdir / "soft_vote.tsv", "soft_vote_predictions");
  artifacts.emplace_back(mdir / "test_f1.tsv", "fold_test_f1");
  update_manifest(out, artifacts);
  return ev;
}

/// Evaluates all trained models under `out` (catalogue order) and writes
/// metrics.tsv with per-fold and soft-vote scores.
inline std::vector<ModelEvaluation> evaluate_runs(const fs::path& out, const fs::path& test_dir) {
  const auto test = ingest(test_dir);
  std::vector<ModelEvaluation> evals;
  for (const auto& m : all_models())
    if (fs::exists(checkpoint_path(out, m, 0)) && fs::exists(model_dir(out, m) / "config.txt"))
      evals.push_back(evaluate_model(out, m, test));
  if (evals.empty()) throw DataError("no trained models found under " + out.string());

  std::ofstream metrics(out / "metrics.tsv", std::ios::binary);
  metrics << "model\tsetup\tfold\ttaskA_macro_f1\ttaskB_weighted_f1\n" << std::setprecision(6);
  for (const auto& e : evals) {
    const char* setup = e.setup == Setup::A ? "A" : "B";
    for (std::size_t f = 0; f < e.runs.size(); ++f) {
      metrics << e.model << '\t' << setup << '\t' << f << '\t' << e.fold_taskA_f1[f] << '\t';
      if (e.setup == Setup::B) {
        LabelMatrix l = threshold(e.runs[f].test_probs);
        metrics << f1_scores(l, sub_truth(test)).weighted_f1;
      } else {
        metrics << "NA";
      }
      metrics << '\n';
    }
    metrics << e.model << '\t' << setup << "\tsoft\t" << e.taskA_macro_f1 << '\t';
    if (e.setup == Setup::B) metrics << e.taskB_weighted_f1;
    else metrics << "NA";
    metrics << '\n';
  }
  metrics.close();
  update_manifest(out, {{out / "metrics.tsv", "metrics"}});
  return evals;
}

// ---------------------------------------------------------------------------
// Model-level ensembles
// ---------------------------------------------------------------------------

/// Predictions of one source: a run directory (soft-voted from its
/// fold_<j>/test_probs.tsv and runs.tsv) or a predictions file.
inline Predictions load_source(const fs::path& src) {
  if (!fs::is_directory(src)) return read_predictions(src.string());
  const auto f1 = read_fold_scores((src / "runs.tsv").string());
  std::vector<FoldRun> runs;
  Predictions first;
  for (std::size_t f = 0; f < f1.size(); ++f) {
    Predictions p = read_predictions((src / ("fold_" + std::to_string(f)) / "test_probs.tsv").string());
    if (f == 0) first = p;
    else if (p.ids != first.ids) throw DataError(src.string() + ": folds disagree on test ids");
    runs.push_back({src.filename().string(), f, f1[f], p.probs});
  }
  if (runs.empty()) throw DataError(src.string() + ": no fold predictions");
  EnsemblePrediction e = soft_vote(runs);
  return {first.ids, e.probs, e.labels};
}

/// soft: F1-weighted fold average of one run directory. hard: majority vote
/// over the sources' labels (sub-labels for four-class sources, the derived
/// mis label follows by OR); probabilities hold the vote fraction.
inline Predictions ensemble_predictions(const std::vector<fs::path>& sources,
                                        const std::string& mode) {
  if (sources.empty()) throw UsageError("ensemble: no inputs");
  if (mode == "soft") {
    if (sources.size() != 1 || !fs::is_directory(sources[0]))
      throw UsageError("ensemble --mode soft takes exactly one run directory");
    return load_source(sources[0]);
  }
  if (mode != "hard") throw UsageError("ensemble mode must be soft or hard");
  std::vector<Predictions> preds;
  for (const auto& s : sources) preds.push_back(load_source(s));
  for (const auto& p : preds)
    if (p.ids != preds[0].ids || p.probs.cols() != preds[0].probs.cols())
      throw DataError("ensemble: sources disagree on ids or label layout");
  std::vector<LabelMatrix> votes;
  ProbMatrix frac = ProbMatrix::Zero(preds[0].labels.rows(), preds[0].labels.cols());
  for (const auto& p : preds) {
    votes.push_back(p.labels);
    frac += p.labels.cast<double>();
  }
  frac /= static_cast<double>(preds.size());
  return {preds[0].ids, frac, hard_vote(votes)};
}

}  // namespace gcanfuse
