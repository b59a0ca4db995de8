#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "gcanfuse/image.hpp"
#include "gcanfuse/preprocess.hpp"

using namespace gcanfuse;

TEST(CleanText, LowercasesAndKeepsPunctuation) {
  EXPECT_EQ(clean_text("Make ME a sandwich!!"), "make me a sandwich!!");
}

TEST(CleanText, DropsLinksHandlesAndTags) {
  EXPECT_EQ(clean_text("see www.example.com @user #tag"), "see");
  EXPECT_EQ(clean_text("go https://x.y/z now http://a"), "go now");
}

TEST(CleanText, DropsNonAscii) {
  EXPECT_EQ(clean_text("\xc3\xa0\xc2\xb6\xc2\xb4" "abc"), "abc");
  EXPECT_EQ(clean_text(""), "");
  EXPECT_EQ(clean_text("  a \t\n  b  "), "a b");
}

TEST(CleanText, OutputAlphabet) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> byte(1, 255);
  for (int trial = 0; trial < 500; ++trial) {
    std::string raw;
    for (int i = 0; i < 40; ++i) raw.push_back(static_cast<char>(byte(rng)));
    std::string out = clean_text(raw);
    for (char c : out)
      EXPECT_TRUE((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ' ||
                  std::string(".,!?'").find(c) != std::string::npos)
          << "unexpected char " << int(static_cast<unsigned char>(c));
    EXPECT_EQ(out.find("  "), std::string::npos);
    if (!out.empty()) {
      EXPECT_NE(out.front(), ' ');
      EXPECT_NE(out.back(), ' ');
    }
  }
}

TEST(CleanText, Idempotent) {
  std::mt19937_64 rng(9);
  const std::vector<std::string> pieces{"www.", "http", "://", "@", "#", "W", "\xe2\x82\xac",
                                        " ", "x", "s", ".", "!", "h", "t", "p", ":", "/"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string raw;
    for (int i = 0; i < 12; ++i) raw += pieces[pick(rng)];
    std::string once = clean_text(raw);
    EXPECT_EQ(clean_text(once), once) << "input: " << raw;
  }
  // Removing a non-ASCII byte would otherwise expose a link prefix.
  std::string tricky = "w\xc3\xa9ww.site.com ok";
  EXPECT_EQ(clean_text(clean_text(tricky)), clean_text(tricky));
}

TEST(CombineTexts, Rules) {
  EXPECT_EQ(combine_texts("a", {}), "a");
  EXPECT_EQ(combine_texts("x", {"c1", "c2"}), "x. c1 and c2.");
  EXPECT_EQ(combine_texts("", {"c1"}), "c1.");
}

TEST(CombineTexts, WorkedMemeExample) {
  std::string out = combine_texts(
      "make me sandwich!!", {"a couple of baseball players standing next to each other",
                             "a woman holding a sign in front of a sign",
                             "a woman standing next to a group of people"});
  EXPECT_EQ(out,
            "make me sandwich!!. a couple of baseball players standing next to each other and "
            "a woman holding a sign in front of a sign and a woman standing next to a group of "
            "people.");
}

TEST(CombineTexts, NoDoubledSeparator) {
  EXPECT_EQ(combine_texts("ends with a period.", {"cap"}), "ends with a period. cap.");
  EXPECT_EQ(combine_texts("x", {"cap."}), "x. cap.");
  EXPECT_EQ(combine_texts("x", {"a", "", "b"}).find(".."), std::string::npos);
}

TEST(Tokenize, SplitsPunctuation) {
  EXPECT_EQ(tokenize("make me a sandwich!!"),
            (std::vector<std::string>{"make", "me", "a", "sandwich", "!", "!"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("a.b"), (std::vector<std::string>{"a", ".", "b"}));
  EXPECT_EQ(tokenize("don't"), (std::vector<std::string>{"don", "'", "t"}));
}

TEST(Vocabulary, FrequencyOrderAndMinFreq) {
  Vocabulary v = build_vocabulary({{"a", "b"}, {"a"}});
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.n_words(), 2u);
  EXPECT_EQ(v.token(0), "[pad]");
  EXPECT_EQ(v.id("a"), 3);
  EXPECT_EQ(v.id("b"), 4);
  EXPECT_EQ(v.n_documents, 2u);
  EXPECT_EQ(build_vocabulary({{"a", "b"}, {"a"}}, 2).n_words(), 1u);
  EXPECT_EQ(build_vocabulary({{}}).n_words(), 0u);
  EXPECT_THROW(build_vocabulary({}), DataError);
}

TEST(Vocabulary, TiesAreLexicographicAndTruncation) {
  Vocabulary v = build_vocabulary({{"zeta", "beta", "alpha", "beta"}}, 1, 2);
  EXPECT_EQ(v.n_words(), 2u);
  EXPECT_EQ(v.id("beta"), 3);
  EXPECT_EQ(v.id("alpha"), 4);
  EXPECT_EQ(v.id("zeta"), kUnkId);
}

TEST(Vocabulary, DeterministicAndSaveLoad) {
  std::vector<std::vector<std::string>> corpus{{"q", "w", "e"}, {"w", "e"}, {"e"}};
  Vocabulary a = build_vocabulary(corpus), b = build_vocabulary(corpus);
  EXPECT_TRUE(a == b);
  auto path = std::filesystem::temp_directory_path() / "gcanfuse_vocab_test.tsv";
  a.save(path.string());
  EXPECT_TRUE(Vocabulary::load(path.string()) == a);
  std::filesystem::remove(path);
}

TEST(EncodeDocument, PaddingAndTruncation) {
  Vocabulary v = build_vocabulary({{"a", "b", "c"}});
  auto s = encode_document({"a"}, v, 4);
  EXPECT_EQ(s.ids, (std::vector<TokenId>{kClsId, v.id("a"), kPadId, kPadId}));
  EXPECT_EQ(s.true_length, 2u);
  s = encode_document({}, v, 4);
  EXPECT_EQ(s.ids, (std::vector<TokenId>{kClsId, kPadId, kPadId, kPadId}));
  EXPECT_EQ(s.true_length, 1u);
  std::vector<std::string> ten(10, "b");
  ten[0] = "a";
  ten[2] = "zzz";
  s = encode_document(ten, v, 4);
  EXPECT_EQ(s.ids, (std::vector<TokenId>{kClsId, v.id("a"), v.id("b"), kUnkId}));
  EXPECT_EQ(s.true_length, 4u);
  EXPECT_THROW(encode_document({"a"}, v, 1), UsageError);
}

TEST(EncodeDocument, DecodeRoundTrip) {
  std::vector<std::string> doc{"x", "y", "x", "z"};
  Vocabulary v = build_vocabulary({doc});
  auto s = encode_document(doc, v, 10);
  EXPECT_EQ(decode_document(s, v), doc);
  s = encode_document(doc, v, 3);
  EXPECT_EQ(decode_document(s, v), (std::vector<std::string>{"x", "y"}));
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

namespace {

RgbImage constant_image(std::size_t w, std::size_t h, std::uint8_t v) { return {w, h, v}; }

}  // namespace

TEST(NormalizeImage, ConstantImageIsZero) {
  ImageTensor t = normalize_image(constant_image(40, 30, 128), 36, 32);
  EXPECT_EQ(t.side, 32u);
  for (double v : t.values) EXPECT_EQ(v, 0.0);
}

TEST(NormalizeImage, TwoByTwoCheckerboard) {
  RgbImage img = constant_image(2, 2, 0);
  for (std::size_t c = 0; c < 3; ++c) {
    img.at(0, 1, c) = 255;
    img.at(1, 1, c) = 255;
  }
  ImageTensor t = normalize_image(img, 2, 2);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(t.at(c, 0, 0), -1.0, 1e-12);
    EXPECT_NEAR(t.at(c, 0, 1), 1.0, 1e-12);
    EXPECT_NEAR(t.at(c, 1, 0), -1.0, 1e-12);
    EXPECT_NEAR(t.at(c, 1, 1), 1.0, 1e-12);
  }
}

TEST(NormalizeImage, StandardizedMoments) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> px(0, 255), side(20, 60);
  for (int trial = 0; trial < 20; ++trial) {
    RgbImage img = constant_image(static_cast<std::size_t>(side(rng)),
                                  static_cast<std::size_t>(side(rng)), 0);
    for (auto& b : img.rgb) b = static_cast<std::uint8_t>(px(rng));
    ImageTensor t = normalize_image(img, 36, 32);
    double mean = 0, var = 0;
    for (double v : t.values) mean += v;
    mean /= static_cast<double>(t.values.size());
    for (double v : t.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(t.values.size());
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_LT(std::abs(var - 1.0), 1e-5);
  }
}

TEST(NormalizeImage, FullScaleSizesAccepted) {
  ImageTensor t = normalize_image(constant_image(300, 280, 7), 256, 224);
  EXPECT_EQ(t.values.size(), 3u * 224 * 224);
  EXPECT_THROW(normalize_image(constant_image(10, 10, 7), 20, 32), UsageError);
  EXPECT_THROW(normalize_image(constant_image(0, 10, 7), 20, 16), DataError);
}

TEST(NormalizeImage, CenterCropOfResizedImage) {
  // A 4x4 image at R=4 is passed through untouched, so the 2x2 centre crop
  // picks pixels (1..2, 1..2).
  RgbImage img = constant_image(4, 4, 0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(10 * (4 * y + x));
  ImageTensor t = normalize_image(img, 4, 2);
  // Centre values 50, 60, 90, 100 -> standardized -1.1767.., -0.7845.., 0.7845.., 1.1767..
  std::vector<double> raw{50, 60, 90, 100};
  double mean = 75, sd = std::sqrt((625 + 225 + 225 + 625) / 4.0);
  EXPECT_NEAR(t.at(0, 0, 0), (raw[0] - mean) / sd, 1e-12);
  EXPECT_NEAR(t.at(1, 0, 1), (raw[1] - mean) / sd, 1e-12);
  EXPECT_NEAR(t.at(2, 1, 0), (raw[2] - mean) / sd, 1e-12);
  EXPECT_NEAR(t.at(0, 1, 1), (raw[3] - mean) / sd, 1e-12);
}

TEST(Ppm, RoundTripAndErrors) {
  RgbImage img = constant_image(3, 2, 0);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 13);
  auto path = std::filesystem::temp_directory_path() / "gcanfuse_ppm_test.ppm";
  write_ppm(path.string(), img);
  RgbImage back = read_ppm(path.string());
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.height, 2u);
  EXPECT_EQ(back.rgb, img.rgb);
  {
    std::ofstream bad(path, std::ios::binary);
    bad << "P3\n1 1\n255\n0 0 0\n";
  }
  EXPECT_THROW(read_ppm(path.string()), DataError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_ppm(path.string()), DataError);
}
