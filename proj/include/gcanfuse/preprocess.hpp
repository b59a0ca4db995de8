#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace gcanfuse {

// ---------------------------------------------------------------------------
// Text cleaning
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

inline bool is_kept_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == '\'';
}

inline bool is_kept_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || is_kept_punct(c);
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::vector<std::string_view> split_ascii_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_ascii_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_ascii_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool starts_with_nocase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (ascii_lower(s[i]) != prefix[i]) return false;
  return true;
}

inline bool is_dropped_token(std::string_view tok) {
  return starts_with_nocase(tok, "http://") ||
         starts_with_nocase(tok, "https://") ||
         starts_with_nocase(tok, "www.") || tok.front() == '@' ||
         tok.front() == '#';
}

inline std::string clean_pass(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::string_view tok : split_ascii_ws(raw)) {
    if (is_dropped_token(tok)) continue;
    std::string kept;
    for (char c : tok) {
      char l = ascii_lower(c);
      if (is_kept_char(l)) kept.push_back(l);
    }
    if (kept.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += kept;
  }
  return out;
}

}  // namespace detail

/// Lowercases, drops URL tokens and @mentions / #hashtags, removes every
/// character outside [a-z0-9 .,!?'] (non-ASCII bytes included) and collapses
/// whitespace. Passes repeat until nothing changes, so the result is a fixed
/// point: removing characters can expose a new URL prefix ("w\xc3\xa9ww.x").
inline std::string clean_text(std::string_view raw) {
  std::string cur = detail::clean_pass(raw);
  for (;;) {
    std::string next = detail::clean_pass(cur);
    if (next == cur) return cur;
    cur = std::move(next);
  }
}

/// OCR text followed by ". " and the captions joined with " and ", closed by
/// a period. Trailing periods on the pieces are stripped so separators never
/// double up.
inline std::string combine_texts(const std::string& ocr,
                                 const std::vector<std::string>& captions) {
  std::vector<std::string> caps;
  for (const auto& c : captions)
    if (!c.empty()) caps.push_back(c);
  if (caps.empty()) return ocr;

  auto rstrip_period = [](std::string s) {
    while (!s.empty() && (s.back() == '.' || s.back() == ' ')) s.pop_back();
    return s;
  };
  std::string joined;
  for (std::size_t i = 0; i < caps.size(); ++i) {
    std::string piece = (i + 1 == caps.size()) ? rstrip_period(caps[i]) : caps[i];
    if (i) joined += " and ";
    joined += piece;
  }
  std::string head = rstrip_period(ocr);
  if (head.empty()) return joined + ".";
  return head + ". " + joined + ".";
}

/// Whitespace split with each of . , ! ? ' emitted as its own token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view word : detail::split_ascii_ws(text)) {
    std::string cur;
    for (char c : word) {
      if (detail::is_kept_punct(c)) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
        out.emplace_back(1, c);
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kClsId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr TokenId kFirstWordId = 3;

class Vocabulary {
 public:
  Vocabulary() : id_to_token_{"[pad]", "[cls]", "[unk]"} {}

  TokenId add(const std::string& token) {
    auto [it, inserted] =
        token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
    if (inserted) id_to_token_.push_back(token);
    return it->second;
  }

  TokenId id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_id_.count(token) != 0;
  }

  const std::string& token(TokenId id) const {
    return id_to_token_.at(static_cast<std::size_t>(id));
  }

  /// Word tokens, excluding the reserved ids.
  std::size_t n_words() const { return id_to_token_.size() - kFirstWordId; }
  std::size_t size() const { return id_to_token_.size(); }

  std::size_t n_documents = 0;

  const std::vector<std::string>& id_to_token() const { return id_to_token_; }

  static bool is_word(TokenId id) { return id >= kFirstWordId; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary " + path);
    out << "n_documents\t" << n_documents << '\n';
    for (std::size_t i = kFirstWordId; i < id_to_token_.size(); ++i)
      out << i << '\t' << id_to_token_[i] << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read vocabulary " + path);
    Vocabulary v;
    std::string key;
    in >> key >> v.n_documents;
    if (key != "n_documents") throw DataError(path + ": bad vocabulary header");
    std::size_t id;
    std::string tok;
    while (in >> id >> tok) {
      if (v.add(tok) != static_cast<TokenId>(id))
        throw DataError(path + ": vocabulary ids out of order");
    }
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.n_documents == b.n_documents && a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Frequency-ranked vocabulary: count >= min_freq, most frequent first, ties
/// lexicographic, at most max_size word entries.
inline Vocabulary build_vocabulary(
    const std::vector<std::vector<std::string>>& corpus,
    std::size_t min_freq = 1,
    std::size_t max_size = std::numeric_limits<std::size_t>::max()) {
  if (corpus.empty()) throw DataError("build_vocabulary: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus)
    for (const auto& t : doc) ++freq[t];

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) ranked.emplace_back(tok, n);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);

  Vocabulary v;
  for (auto& [tok, n] : ranked) v.add(tok);
  v.n_documents = corpus.size();
  return v;
}

struct TokenIdSequence {
  std::vector<TokenId> ids;
  std::size_t true_length = 0;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const TokenIdSequence&, const TokenIdSequence&) = default;
};

/// [CLS] + ids (UNK when unknown), truncated to seq_len - 1, padded.
inline TokenIdSequence encode_document(const std::vector<std::string>& tokens,
                                       const Vocabulary& vocab,
                                       std::size_t seq_len) {
  if (seq_len < 2) throw UsageError("encode_document: sequence length must be >= 2");
  TokenIdSequence s;
  s.ids.assign(seq_len, kPadId);
  s.ids[0] = kClsId;
  std::size_t n = std::min(tokens.size(), seq_len - 1);
  for (std::size_t i = 0; i < n; ++i) s.ids[i + 1] = vocab.id(tokens[i]);
  s.true_length = 1 + n;
  return s;
}

/// Maps non-reserved ids back to tokens, stopping at true_length.
inline std::vector<std::string> decode_document(const TokenIdSequence& seq,
                                                const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < seq.true_length; ++i)
    out.push_back(vocab.token(seq.ids[i]));
  return out;
}

}  // namespace gcanfuse
