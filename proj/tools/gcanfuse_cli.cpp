// Command-line driver: synthetic data, graph construction, cross-validated
// training, evaluation, ensembling and significance tests.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gcanfuse/data/synth.hpp"
#include "gcanfuse/ensemble/mann_whitney.hpp"
#include "gcanfuse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gcanfuse;

namespace {

int cmd_gen_synth(const std::string& spec_file, const std::string& out) {
  SynthSpec spec = spec_file.empty() ? SynthSpec{} : SynthSpec::from(KeyValues::parse_file(spec_file));
  spec.validate();
  gen_synth(spec, out);
  std::vector<std::pair<fs::path, std::string>> files{{fs::path(out) / kDatasetFile, "dataset"}};
  for (const auto& e : fs::directory_iterator(fs::path(out) / kImageDir))
    files.emplace_back(e.path(), "image");
  update_manifest(out, files);
  std::cout << "wrote " << spec.n_samples << " samples to " << out << '\n';
  return 0;
}

int cmd_build_graph(const std::string& data, std::size_t window, std::size_t min_freq,
                    const std::string& out) {
  RunConfig cfg;
  cfg.window_len = window;
  cfg.min_freq = min_freq;
  Workspace ws = build_workspace(cfg, ingest(data));
  write_graph(out, ws.graph);
  std::cout << "graph: " << ws.graph.n_docs << " documents, " << ws.graph.n_words
            << " words, " << ws.graph.raw.nonZeros() << " nonzeros\n";
  return 0;
}

struct TrainArgs {
  std::string config, model, setup, data, out;
  std::optional<std::size_t> folds, jobs;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = RunConfig::from(KeyValues::parse_file(a.config));
  if (!a.model.empty()) cfg.model = a.model;
  if (!a.setup.empty()) {
    if (a.setup != "A" && a.setup != "B") throw UsageError("--setup must be A or B");
    cfg.setup = a.setup == "A" ? Setup::A : Setup::B;
  }
  if (!a.data.empty()) cfg.dataset = a.data;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.folds) cfg.folds = *a.folds;
  if (a.jobs) cfg.jobs = *a.jobs;
  if (cfg.dataset.empty()) throw UsageError("no dataset (set dataset in the config or pass --data)");
  if (cfg.output_dir.empty()) throw UsageError("no output directory (--out)");
  TrainSummary s = train_cross_validated(cfg, cfg.model, cfg.output_dir);
  for (std::size_t f = 0; f < s.best_f1.size(); ++f)
    std::cout << s.model << " fold " << f << ": best val F1 " << s.best_f1[f] << " after "
              << s.epochs_run[f] << " epochs\n";
  return 0;
}

int cmd_evaluate(const std::string& runs, const std::string& test) {
  auto evals = evaluate_runs(runs, test);
  for (const auto& e : evals) {
    std::cout << e.model << ": soft-vote taskA macro-F1 " << e.taskA_macro_f1;
    if (e.setup == Setup::B) std::cout << ", taskB weighted-F1 " << e.taskB_weighted_f1;
    std::cout << '\n';
  }
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& runs, const std::string& mode,
                 const std::string& out) {
  std::vector<fs::path> sources(runs.begin(), runs.end());
  Predictions p = ensemble_predictions(sources, mode);
  write_predictions(out, p);
  return 0;
}

int cmd_significance(const std::string& a, const std::string& b, const std::string& out) {
  const auto x = read_fold_scores(a);
  const auto y = read_fold_scores(b);
  const MannWhitneyResult r = mann_whitney_u(x, y);
  std::ostringstream report;
  report << std::setprecision(17);
  report << "a\tb\tu\tp\tmethod\tstars\n"
         << a << '\t' << b << '\t' << r.u << '\t' << r.p_two_sided << '\t'
         << (r.exact ? "exact" : "normal") << '\t' << significance_stars(r.p_two_sided) << '\n';
  if (out.empty()) {
    std::cout << report.str();
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw DataError("cannot write " + out);
    f << report.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcanfuse: graph-attention and image fusion classifiers"};
  app.require_subcommand(1);

  std::string spec_file, synth_out;
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic bi-modal dataset");
  gen->add_option("--spec", spec_file, "key = value generator spec");
  gen->add_option("--out", synth_out, "output directory")->required();

  std::string graph_data, graph_out;
  std::size_t window = 10, min_freq = 1;
  auto* bg = app.add_subcommand("build-graph", "build the corpus graph of a dataset");
  bg->add_option("--data", graph_data, "dataset directory")->required();
  bg->add_option("--window", window, "sliding window length");
  bg->add_option("--min-freq", min_freq, "minimum token frequency");
  bg->add_option("--out", graph_out, "graph file")->required();

  TrainArgs ta;
  std::size_t folds = 0, jobs = 0;
  auto* tr = app.add_subcommand("train", "k-fold cross-validated training of one model");
  tr->add_option("--config", ta.config, "run config file");
  tr->add_option("--model", ta.model, "bertc, gcan, vit or a fusion of them");
  tr->add_option("--setup", ta.setup, "A or B");
  tr->add_option("--data", ta.data, "training dataset directory");
  auto* folds_opt = tr->add_option("--folds", folds, "number of folds");
  auto* jobs_opt = tr->add_option("--jobs", jobs, "folds trained in parallel");
  tr->add_option("--out", ta.out, "run directory");

  std::string runs_dir, test_dir;
  auto* ev = app.add_subcommand("evaluate", "evaluate trained folds on a test set");
  ev->add_option("--runs", runs_dir, "run directory")->required();
  ev->add_option("--test", test_dir, "test dataset directory")->required();

  std::vector<std::string> ens_runs;
  std::string mode = "soft", ens_out;
  auto* en = app.add_subcommand("ensemble", "soft or hard voting over predictions");
  en->add_option("--runs", ens_runs, "model run directories or prediction files")->required();
  en->add_option("--mode", mode, "soft or hard");
  en->add_option("--out", ens_out, "predictions file")->required();

  std::string sa, sb, sig_out;
  auto* sg = app.add_subcommand("significance", "Mann-Whitney U test on fold scores");
  sg->add_option("--a", sa, "fold score file")->required();
  sg->add_option("--b", sb, "fold score file")->required();
  sg->add_option("--out", sig_out, "report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_synth(spec_file, synth_out);
    if (*bg) return cmd_build_graph(graph_data, window, min_freq, graph_out);
    if (*tr) {
      if (folds_opt->count()) ta.folds = folds;
      if (jobs_opt->count()) ta.jobs = jobs;
      return cmd_train(ta);
    }
    if (*ev) return cmd_evaluate(runs_dir, test_dir);
    if (*en) return cmd_ensemble(ens_runs, mode, ens_out);
    if (*sg) return cmd_significance(sa, sb, sig_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
