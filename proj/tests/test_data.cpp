#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "gcanfuse/data/dataset.hpp"
#include "gcanfuse/data/synth.hpp"

using namespace gcanfuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path / kImageDir);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_table(const fs::path& dir, const std::string& body,
                 const std::vector<std::string>& images) {
  std::ofstream(dir / kDatasetFile) << body;
  for (const auto& id : images) write_ppm((dir / kImageDir / (id + ".ppm")).string(), RgbImage(2, 2, 9));
}

std::string header() { return std::string(kDatasetHeader) + "\n"; }

std::string error_of(const fs::path& p) {
  try {
    ingest(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Ingest, ParsesAndSortsById) {
  TempDir d("gcanfuse_ingest_ok");
  write_table(d.path,
              header() + "c\tthird meme\t\t0\t0\t0\t0\t0\n"
                         "a\tfirst meme\ta cat|a dog\t1\t1\t0\t0\t1\n"
                         "b\tsecond\ta sign\t1\t0\t0\t0\t0\n",
              {"a", "b", "c"});
  auto s = ingest(d.path);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].id, "a");
  EXPECT_EQ(s[1].id, "b");
  EXPECT_EQ(s[2].id, "c");
  EXPECT_EQ(s[0].captions, (std::vector<std::string>{"a cat", "a dog"}));
  EXPECT_TRUE(s[2].captions.empty());
  EXPECT_EQ(s[0].labels, (LabelVector{1, {1, 0, 0, 1}}));
  EXPECT_EQ(s[1].labels.mis, 1);
  EXPECT_EQ(s[0].image.width, 2u);
  EXPECT_EQ(ingest(d.path / kDatasetFile).size(), 3u);
}

TEST(Ingest, RejectsLabelInvariantViolation) {
  TempDir d("gcanfuse_ingest_inv");
  write_table(d.path, header() + "a\tx\t\t1\t0\t0\t0\t0\nq\ty\t\t0\t1\t0\t0\t0\n", {"a", "q"});
  std::string e = error_of(d.path);
  EXPECT_NE(e.find(":3:"), std::string::npos) << e;
  EXPECT_NE(e.find("invariant"), std::string::npos) << e;
}

TEST(Ingest, ReportsHeaderMissingImageAndMalformedRows) {
  TempDir d("gcanfuse_ingest_bad");
  write_table(d.path, "id\ttext\n", {});
  EXPECT_NE(error_of(d.path).find(":1:"), std::string::npos);

  write_table(d.path, header() + "a\tx\t\t0\t0\t0\t0\t0\nlost\ty\t\t0\t0\t0\t0\t0\n", {"a"});
  EXPECT_NE(error_of(d.path).find("lost"), std::string::npos);

  write_table(d.path, header() + "a\tx\t\t0\t0\t0\t0\t0\nb\tonly three\tfields\n", {"a", "b"});
  EXPECT_NE(error_of(d.path).find(":3:"), std::string::npos);

  write_table(d.path, header() + "a\tx\t\t2\t0\t0\t0\t0\n", {"a"});
  EXPECT_NE(error_of(d.path).find("not 0 or 1"), std::string::npos);

  write_table(d.path, header() + "a\tx\t\t0\t0\t0\t0\t0\na\ty\t\t0\t0\t0\t0\t0\n", {"a"});
  EXPECT_NE(error_of(d.path).find("duplicate"), std::string::npos);

  EXPECT_THROW(ingest(d.path / "nowhere"), DataError);
}

TEST(Dataset, WriteThenIngestRoundTrip) {
  TempDir d("gcanfuse_dataset_rt");
  SynthSpec spec;
  spec.n_samples = 12;
  auto samples = generate_synthetic(spec);
  samples[0].ocr_text = "tab\there";
  write_dataset(d.path, samples);
  auto back = ingest(d.path);
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, samples[i].id);
    EXPECT_EQ(back[i].labels, samples[i].labels);
    EXPECT_EQ(back[i].captions, samples[i].captions);
    EXPECT_EQ(back[i].image.rgb, samples[i].image.rgb);
  }
  EXPECT_EQ(back[0].ocr_text, "tab here");
}

TEST(Synth, DeterministicAndWellFormed) {
  SynthSpec spec;
  auto a = generate_synthetic(spec);
  auto b = generate_synthetic(spec);
  ASSERT_EQ(a.size(), 100u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].ocr_text, b[i].ocr_text);
    EXPECT_EQ(a[i].image.rgb, b[i].image.rgb);
    EXPECT_TRUE(a[i].labels.valid());
    EXPECT_EQ(a[i].image.width, spec.image_side);
  }
  spec.seed = 2;
  EXPECT_NE(generate_synthetic(spec)[0].ocr_text + generate_synthetic(spec)[1].ocr_text,
            a[0].ocr_text + a[1].ocr_text);

  TempDir d("gcanfuse_synth_files");
  gen_synth(SynthSpec{}, d.path);
  std::size_t ppm = 0;
  for (const auto& e : fs::directory_iterator(d.path / kImageDir)) ppm += e.path().extension() == ".ppm";
  EXPECT_EQ(ppm, 100u);
  EXPECT_EQ(ingest(d.path).size(), 100u);
}

TEST(Synth, SpecValidation) {
  SynthSpec s;
  s.p_aligned = 0.9;
  EXPECT_THROW(s.validate(), UsageError);
  s = SynthSpec{};
  s.image_side = 20;
  EXPECT_THROW(s.validate(), UsageError);
  std::istringstream in("n_samples = 7\nseed = 3\nnoise = 0\n");
  SynthSpec parsed = SynthSpec::from(KeyValues::parse(in));
  EXPECT_EQ(parsed.n_samples, 7u);
  EXPECT_EQ(parsed.seed, 3u);
  EXPECT_FALSE(parsed.noise);
}

namespace {

/// Bayes accuracy of predicting each sub-label from what one view exposes.
/// `view` maps a rule to the observation; for every observation the best
/// constant guess per class is the majority label under the rule table.
double bayes_accuracy(const std::vector<SynthRule>& table, int view) {
  std::map<int, std::array<std::array<double, 2>, 4>> mass;  // obs -> class -> label -> p
  for (const auto& r : table) {
    int obs = view == 0 ? r.text : view == 1 ? r.image : (r.text << 4 | r.image);
    for (int c = 0; c < 4; ++c) mass[obs][c][(r.labels() >> c) & 1] += r.probability;
  }
  double acc = 0;
  for (const auto& [obs, per_class] : mass)
    for (const auto& m : per_class) acc += std::max(m[0], m[1]) / 4.0;
  return acc;
}

double taskA_bayes_accuracy(const std::vector<SynthRule>& table, int view) {
  std::map<int, std::array<double, 2>> mass;
  for (const auto& r : table) {
    int obs = view == 0 ? r.text : view == 1 ? r.image : (r.text << 4 | r.image);
    mass[obs][r.labels() ? 1 : 0] += r.probability;
  }
  double acc = 0;
  for (const auto& [obs, m] : mass) acc += std::max(m[0], m[1]);
  return acc;
}

}  // namespace

TEST(Synth, RuleTableNeedsBothModalities) {
  const auto table = synth_rule_table(SynthSpec{});
  double total = 0;
  for (const auto& r : table) total += r.probability;
  EXPECT_NEAR(total, 1.0, 1e-12);
  for (int task = 0; task < 2; ++task) {
    auto acc = [&](int view) {
      return task ? taskA_bayes_accuracy(table, view) : bayes_accuracy(table, view);
    };
    EXPECT_LT(acc(0), 1.0 - 0.05) << "text view, task " << task;
    EXPECT_LT(acc(1), 1.0 - 0.05) << "image view, task " << task;
    EXPECT_NEAR(acc(2), 1.0, 1e-12);
  }
  EXPECT_NEAR(taskA_bayes_accuracy(table, 0), 0.75, 1e-12);
  EXPECT_NEAR(taskA_bayes_accuracy(table, 1), 0.75, 1e-12);
  // Per-class accuracy is diluted by the many easy negatives: 1 - 0.25 / 4.
  EXPECT_NEAR(bayes_accuracy(table, 0), 0.9375, 1e-12);
}

TEST(Synth, SamplesFollowTheRuleTable) {
  SynthSpec spec;
  spec.n_samples = 4000;
  spec.seed = 5;
  spec.image_side = 32;
  spec.motif_side = 8;
  spec.noise = false;
  auto samples = generate_synthetic(spec);
  const auto& kw = synth_detail::kKeywords;
  std::map<ClassSet, double> freq;
  for (const auto& s : samples) {
    ClassSet text = 0;
    for (int c = 0; c < 4; ++c)
      if (s.ocr_text.find(kw[c][0]) != std::string::npos ||
          s.ocr_text.find(kw[c][1]) != std::string::npos)
        text |= static_cast<ClassSet>(1u << c);
    // Labels are always a subset of the text cues.
    for (int c = 0; c < 4; ++c)
      if (s.labels.sub[c]) EXPECT_TRUE(text & (1u << c)) << s.id;
    ClassSet lab = 0;
    for (int c = 0; c < 4; ++c) lab |= static_cast<ClassSet>(s.labels.sub[c] << c);
    freq[lab] += 1.0 / static_cast<double>(samples.size());
  }
  std::map<ClassSet, double> want;
  for (const auto& r : synth_rule_table(spec)) want[r.labels()] += r.probability;
  for (const auto& [lab, p] : want) EXPECT_NEAR(freq[lab], p, 0.03) << int(lab);
}

TEST(KeyValues, ParsingAndErrors) {
  std::istringstream in("a = 1\n  # comment\nb=two words # tail\n");
  KeyValues kv = KeyValues::parse(in);
  EXPECT_EQ(kv.get("a", 0.0), 1.0);
  EXPECT_EQ(kv.get("b", std::string()), "two words");
  EXPECT_EQ(kv.get_size("missing", 4), 4u);
  EXPECT_THROW(kv.get("b", 0.0), UsageError);
  std::istringstream bad("= 3\n");
  EXPECT_THROW(KeyValues::parse(bad), UsageError);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
