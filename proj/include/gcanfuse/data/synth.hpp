#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../keyvalue.hpp"
#include "dataset.hpp"

namespace gcanfuse {

/// Synthetic meme generator. Each sample carries a set K of text cue classes
/// (keywords in the OCR text) and a set V of image cue classes (coloured
/// squares). Sub-label c fires iff c is in both K and V, so neither modality
/// alone determines the labels.
///
/// Scenarios: aligned (K = V, one class or, with p_overlap, two), text-only
/// decoy (K = {c}, V = {}), image-only decoy (V = {c}, K = {}) and neutral
/// (both empty, remaining probability mass).
struct SynthSpec {
  std::size_t n_samples = 100;
  std::uint64_t seed = 1;
  double p_aligned = 0.40;
  double p_text_decoy = 0.25;
  double p_image_decoy = 0.25;
  double p_overlap = 0.15;
  std::size_t image_side = 48;
  std::size_t motif_side = 12;
  std::string id_prefix = "s";
  bool noise = true;

  double p_neutral() const { return 1.0 - p_aligned - p_text_decoy - p_image_decoy; }

  void validate() const {
    if (n_samples == 0) throw UsageError("SynthSpec: n_samples must be positive");
    for (double p : {p_aligned, p_text_decoy, p_image_decoy, p_overlap})
      if (p < 0 || p > 1) throw UsageError("SynthSpec: probabilities must lie in [0,1]");
    if (p_neutral() < -1e-12) throw UsageError("SynthSpec: scenario probabilities exceed 1");
    if (image_side < 2 * motif_side + 8)
      throw UsageError("SynthSpec: image too small for two motifs");
  }

  static SynthSpec from(const KeyValues& kv) {
    SynthSpec s;
    s.n_samples = kv.get_size("n_samples", s.n_samples);
    s.seed = kv.get("seed", s.seed);
    s.p_aligned = kv.get("p_aligned", s.p_aligned);
    s.p_text_decoy = kv.get("p_text_decoy", s.p_text_decoy);
    s.p_image_decoy = kv.get("p_image_decoy", s.p_image_decoy);
    s.p_overlap = kv.get("p_overlap", s.p_overlap);
    s.image_side = kv.get_size("image_side", s.image_side);
    s.motif_side = kv.get_size("motif_side", s.motif_side);
    s.id_prefix = kv.get("id_prefix", s.id_prefix);
    s.noise = kv.get("noise", std::string(s.noise ? "1" : "0")) == "1";
    s.validate();
    return s;
  }
};

using ClassSet = std::uint8_t;  // bit c set = class c present

/// One cell of the generator's finite rule table.
struct SynthRule {
  double probability;
  ClassSet text;
  ClassSet image;

  ClassSet labels() const { return text & image; }
};

inline std::vector<SynthRule> synth_rule_table(const SynthSpec& s) {
  std::vector<SynthRule> t;
  for (int c = 0; c < 4; ++c) {
    ClassSet one = static_cast<ClassSet>(1u << c);
    t.push_back({s.p_aligned * (1 - s.p_overlap) / 4.0, one, one});
    t.push_back({s.p_text_decoy / 4.0, one, 0});
    t.push_back({s.p_image_decoy / 4.0, 0, one});
    for (int d = c + 1; d < 4; ++d) {
      ClassSet two = static_cast<ClassSet>(one | (1u << d));
      t.push_back({s.p_aligned * s.p_overlap / 6.0, two, two});
    }
  }
  t.push_back({s.p_neutral(), 0, 0});
  return t;
}

namespace synth_detail {

inline const std::array<std::array<const char*, 2>, 4> kKeywords{{
    {"blush", "disgrace"},   // shaming
    {"kitchen", "sandwich"}, // stereotype
    {"curves", "model"},     // objectification
    {"punch", "threat"},     // violence
}};

inline const std::array<const char*, 32> kFiller{
    "when", "you", "finally", "get", "the", "weekend", "monday", "again", "my",
    "friend", "said", "nobody", "knows", "that", "feeling", "every", "time", "we",
    "go", "out", "this", "is", "fine", "really", "just", "look", "at", "him",
    "her", "they", "today", "work"};

inline const std::array<const char*, 8> kCaptions{
    "a person standing in a room",
    "a group of people posing for a picture",
    "a dog sitting on a couch",
    "a view of a city street",
    "a man holding a phone",
    "a woman sitting at a table",
    "a couple of people standing next to each other",
    "a close up of a sign"};

inline const std::array<std::array<int, 3>, 4> kColours{{
    {220, 40, 40}, {40, 200, 40}, {40, 60, 220}, {230, 220, 40}}};

}  // namespace synth_detail

inline std::vector<RawSample> generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  using namespace synth_detail;
  const auto table = synth_rule_table(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  std::vector<RawSample> out;
  const int width = static_cast<int>(std::to_string(spec.n_samples).size()) + 1;
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    double u = unit(rng), acc = 0;
    const SynthRule* rule = &table.back();
    for (const auto& r : table) {
      acc += r.probability;
      if (u < acc) {
        rule = &r;
        break;
      }
    }

    RawSample s;
    std::ostringstream id;
    id << spec.id_prefix << std::setw(width) << std::setfill('0') << i;
    s.id = id.str();

    // OCR text: filler words with the cue keywords inserted.
    std::vector<std::string> words;
    std::size_t n_fill = 3 + pick(4);
    for (std::size_t w = 0; w < n_fill; ++w) words.push_back(kFiller[pick(kFiller.size())]);
    for (int c = 0; c < 4; ++c)
      if (rule->text & (1u << c)) {
        std::size_t at = pick(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), kKeywords[c][pick(2)]);
      }
    std::string text;
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::string word = words[w];
      if (spec.noise && unit(rng) < 0.15)
        for (char& ch : word) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      text += (w ? " " : "") + word;
    }
    if (spec.noise) {
      double r = unit(rng);
      if (r < 0.1) text += " @user" + std::to_string(pick(100));
      else if (r < 0.2) text += " #meme";
      else if (r < 0.25) text += " www.memes.example/" + std::to_string(pick(1000));
      else if (r < 0.3) text += " \xc3\xa0\xc2\xb6\xc2\xb4";
      if (unit(rng) < 0.3) text += "!!";
    }
    s.ocr_text = text;
    std::size_t n_caps = pick(3);
    for (std::size_t c = 0; c < n_caps; ++c) s.captions.push_back(kCaptions[pick(kCaptions.size())]);

    // Image: grey noise background with one square per image cue class.
    s.image = RgbImage(spec.image_side, spec.image_side);
    std::uniform_int_distribution<int> grey(95, 160), jitter(-18, 18);
    for (std::size_t y = 0; y < spec.image_side; ++y)
      for (std::size_t x = 0; x < spec.image_side; ++x) {
        int g = grey(rng);
        for (std::size_t c = 0; c < 3; ++c)
          s.image.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(g + jitter(rng) / 3, 0, 255));
      }
    std::vector<int> motif_classes;
    for (int c = 0; c < 4; ++c)
      if (rule->image & (1u << c)) motif_classes.push_back(c);
    const std::size_t margin = 6;
    const std::size_t half = spec.image_side / 2;
    for (std::size_t m = 0; m < motif_classes.size(); ++m) {
      // Two motifs go to opposite horizontal halves.
      std::size_t x_lo = margin, x_hi = spec.image_side - margin - spec.motif_side;
      if (motif_classes.size() == 2) {
        x_lo = m == 0 ? margin : half;
        x_hi = m == 0 ? half - spec.motif_side : spec.image_side - margin - spec.motif_side;
      }
      std::size_t y_hi = spec.image_side - margin - spec.motif_side;
      std::size_t x0 = x_lo + pick(x_hi - x_lo + 1);
      std::size_t y0 = margin + pick(y_hi - margin + 1);
      const auto& col = kColours[static_cast<std::size_t>(motif_classes[m])];
      for (std::size_t y = y0; y < y0 + spec.motif_side; ++y)
        for (std::size_t x = x0; x < x0 + spec.motif_side; ++x)
          for (std::size_t c = 0; c < 3; ++c)
            s.image.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(col[c] + jitter(rng), 0, 255));
    }

    ClassSet labels = rule->labels();
    s.labels.mis = labels ? 1 : 0;
    for (int c = 0; c < 4; ++c) s.labels.sub[c] = (labels >> c) & 1;
    out.push_back(std::move(s));
  }
  return out;
}

inline void gen_synth(const SynthSpec& spec, const std::filesystem::path& dir) {
  write_dataset(dir, generate_synthetic(spec));
}

}  // namespace gcanfuse
