#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "gcanfuse_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

/// Runs the CLI inside the work directory; returns its exit status.
int run(const std::string& args, std::string* output = nullptr) {
  const fs::path log = work_dir() / "last_output.txt";
  const std::string cmd = "cd '" + work_dir().string() + "' && '" GCANFUSE_CLI "' " + args +
                          " > '" + log.string() + "' 2>&1";
  int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::ostringstream s;
    s << in.rdbuf();
    *output = s.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kRunConfig =
    "epochs = 2\nwarmup_epochs = 1\nfusion_epochs = 2\nfusion_warmup_epochs = 1\n"
    "lr = 0.002\nfusion_lr = 0.003\nbatch_size = 8\nfusion_batch_size = 8\n"
    "seq_len = 12\nd_att = 8\nheads = 2\nlayers = 2\nresize = 18\ncrop = 16\n"
    "patch = 8\nwindow_len = 4\n";

/// Small datasets and one trained configuration shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    write(work_dir() / "tr.spec", "n_samples = 40\nseed = 3\nimage_side = 32\nmotif_side = 8\n");
    write(work_dir() / "te.spec",
          "n_samples = 16\nseed = 4\nimage_side = 32\nmotif_side = 8\nid_prefix = t\n");
    write(work_dir() / "run.cfg", kRunConfig);
    ASSERT_EQ(run("gen-synth --spec tr.spec --out train"), 0);
    ASSERT_EQ(run("gen-synth --spec te.spec --out test"), 0);
  }
};

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
  std::string out;
  EXPECT_EQ(run("", &out), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("train --config nowhere.cfg --out x"), 1);
  EXPECT_EQ(run("train --model nonsense --data d --out x"), 1);
  EXPECT_EQ(run("train --setup C --data d --out x"), 1);
}

TEST(Cli, DataErrorsExitWithTwo) {
  std::string out;
  EXPECT_EQ(run("build-graph --data missing_dir --out g.txg", &out), 2);
  EXPECT_NE(out.find("missing_dir"), std::string::npos) << out;
  write(work_dir() / "scores_bad.tsv", "nope\n");
  EXPECT_EQ(run("significance --a scores_bad.tsv --b scores_bad.tsv"), 2);
}

TEST(Cli, SignificanceReport) {
  write(work_dir() / "sa.tsv", "fold\tf1\n0\t1\n1\t2\n");
  write(work_dir() / "sb.tsv", "fold\tf1\n0\t3\n1\t4\n");
  ASSERT_EQ(run("significance --a sa.tsv --b sb.tsv --out sig.tsv"), 0);
  std::string report = slurp(work_dir() / "sig.tsv");
  EXPECT_NE(report.find("a\tb\tu\tp\tmethod\tstars\n"), std::string::npos);
  EXPECT_NE(report.find("\t0\t0.33333333333333331\texact\tns\n"), std::string::npos) << report;
}

TEST_F(CliPipeline, GenSynthIsDeterministic) {
  ASSERT_EQ(run("gen-synth --spec tr.spec --out train_again"), 0);
  EXPECT_EQ(slurp(work_dir() / "train" / "data.tsv"), slurp(work_dir() / "train_again" / "data.tsv"));
  EXPECT_EQ(slurp(work_dir() / "train" / "images" / "s00.ppm"),
            slurp(work_dir() / "train_again" / "images" / "s00.ppm"));
  EXPECT_TRUE(fs::exists(work_dir() / "train" / "manifest.tsv"));
}

TEST_F(CliPipeline, BuildGraph) {
  std::string out;
  ASSERT_EQ(run("build-graph --data train --window 4 --out g.txg", &out), 0) << out;
  EXPECT_TRUE(fs::exists(work_dir() / "g.txg"));
  EXPECT_NE(out.find("40 documents"), std::string::npos) << out;
}

TEST_F(CliPipeline, FusionNeedsTrainedMembers) {
  std::string out;
  EXPECT_EQ(run("train --config run.cfg --data train --model gcan-vit --folds 2 --out lonely", &out), 1);
  EXPECT_NE(out.find("gcan"), std::string::npos) << out;
}

TEST_F(CliPipeline, TrainEvaluateEnsembleEndToEnd) {
  std::string out;
  for (const char* model : {"gcan", "vit", "gcan-vit"})
    ASSERT_EQ(run(std::string("train --config run.cfg --data train --folds 2 --model ") + model +
                      " --out runs",
                  &out),
              0)
        << out;
  ASSERT_EQ(run("evaluate --runs runs --test test", &out), 0) << out;
  const std::string metrics = slurp(work_dir() / "runs" / "metrics.tsv");
  EXPECT_EQ(metrics.rfind("model\tsetup\tfold\ttaskA_macro_f1\ttaskB_weighted_f1\n", 0), 0u);
  for (const char* m : {"gcan\tB\tsoft\t", "vit\tB\tsoft\t", "gcan-vit\tB\tsoft\t"})
    EXPECT_NE(metrics.find(m), std::string::npos) << m << "\n" << metrics;

  ASSERT_EQ(run("ensemble --runs runs/gcan --mode soft --out soft.tsv", &out), 0) << out;
  EXPECT_EQ(slurp(work_dir() / "soft.tsv"), slurp(work_dir() / "runs" / "gcan" / "soft_vote.tsv"));
  ASSERT_EQ(run("ensemble --runs runs/gcan/soft_vote.tsv runs/vit/soft_vote.tsv "
                "runs/gcan-vit/soft_vote.tsv --mode hard --out hard.tsv",
                &out),
            0)
      << out;
  const std::string hard = slurp(work_dir() / "hard.tsv");
  EXPECT_EQ(std::count(hard.begin(), hard.end(), '\n'), 17);
  EXPECT_EQ(run("ensemble --runs runs/gcan runs/vit --mode soft --out x.tsv"), 1);
  EXPECT_EQ(run("significance --a runs/gcan/runs.tsv --b runs/vit/runs.tsv", &out), 0) << out;

  // Same configuration and seed, fresh directory: identical bytes.
  ASSERT_EQ(run("train --config run.cfg --data train --folds 2 --model gcan --out runs2"), 0);
  EXPECT_EQ(slurp(work_dir() / "runs" / "gcan" / "fold_0" / "checkpoint.gfc"),
            slurp(work_dir() / "runs2" / "gcan" / "fold_0" / "checkpoint.gfc"));
  EXPECT_EQ(slurp(work_dir() / "runs" / "gcan" / "train_log.tsv"),
            slurp(work_dir() / "runs2" / "gcan" / "train_log.tsv"));

  // Tampering with a member checkpoint is caught at evaluation time.
  std::ofstream(work_dir() / "runs" / "gcan" / "fold_0" / "checkpoint.gfc",
                std::ios::app)
      << ' ';
  EXPECT_EQ(run("evaluate --runs runs --test test", &out), 2) << out;
}
