#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "preprocess.hpp"

namespace gcanfuse {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using DenseMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using TokenPair = std::pair<TokenId, TokenId>;

inline TokenPair ordered_pair(TokenId a, TokenId b) {
  return a < b ? TokenPair{a, b} : TokenPair{b, a};
}

/// Sliding-window co-occurrence counts. token_windows[t] is the number of
/// windows containing t at least once; pair_windows is keyed by the ordered
/// pair (min, max).
struct WindowStats {
  std::size_t window_len = 0;
  std::size_t total_windows = 0;
  std::map<TokenId, std::size_t> token_windows;
  std::map<TokenPair, std::size_t> pair_windows;

  std::size_t windows_with(TokenId t) const {
    auto it = token_windows.find(t);
    return it == token_windows.end() ? 0 : it->second;
  }
  std::size_t windows_with(TokenId a, TokenId b) const {
    auto it = pair_windows.find(ordered_pair(a, b));
    return it == pair_windows.end() ? 0 : it->second;
  }

  /// Counts are additive across corpus shards.
  void merge(const WindowStats& other) {
    if (other.window_len != window_len)
      throw UsageError("WindowStats::merge: window length differs");
    total_windows += other.total_windows;
    for (const auto& [t, n] : other.token_windows) token_windows[t] += n;
    for (const auto& [p, n] : other.pair_windows) pair_windows[p] += n;
  }
};

/// A document of length L yields max(1, L - window_len + 1) windows with
/// step 1. Reserved ids (PAD/CLS/UNK) occupy positions but are not counted.
inline WindowStats count_windows(const std::vector<std::vector<TokenId>>& corpus,
                                 std::size_t window_len) {
  if (window_len < 1) throw UsageError("count_windows: window length must be >= 1");
  WindowStats s;
  s.window_len = window_len;
  for (const auto& doc : corpus) {
    std::size_t n_win = doc.size() > window_len ? doc.size() - window_len + 1 : 1;
    for (std::size_t w = 0; w < n_win; ++w) {
      std::size_t end = std::min(doc.size(), w + window_len);
      std::set<TokenId> members;
      for (std::size_t i = w; i < end; ++i)
        if (Vocabulary::is_word(doc[i])) members.insert(doc[i]);
      ++s.total_windows;
      for (auto it = members.begin(); it != members.end(); ++it) {
        ++s.token_windows[*it];
        for (auto jt = std::next(it); jt != members.end(); ++jt)
          ++s.pair_windows[{*it, *jt}];
      }
    }
  }
  return s;
}

/// ln(p(i,j) / (p(i) p(j))) with window probabilities. Returns -inf when the
/// pair never shares a window; such edges are never placed in the graph.
inline double pmi(const WindowStats& stats, TokenId i, TokenId j) {
  if (stats.total_windows == 0) throw UsageError("pmi: no windows counted");
  const double n = static_cast<double>(stats.total_windows);
  const double nij = static_cast<double>(stats.windows_with(i, j));
  if (nij == 0) return -std::numeric_limits<double>::infinity();
  const double ni = static_cast<double>(stats.windows_with(i));
  const double nj = static_cast<double>(stats.windows_with(j));
  return std::log((nij / n) / ((ni / n) * (nj / n)));
}

/// Inverse document frequencies ln(n_D / df) indexed by token id.
inline std::vector<double> inverse_document_frequency(
    const std::vector<std::vector<TokenId>>& corpus, std::size_t vocab_size) {
  std::vector<std::size_t> df(vocab_size, 0);
  for (const auto& doc : corpus) {
    std::set<TokenId> seen(doc.begin(), doc.end());
    for (TokenId t : seen)
      if (Vocabulary::is_word(t) && static_cast<std::size_t>(t) < vocab_size)
        ++df[static_cast<std::size_t>(t)];
  }
  std::vector<double> idf(vocab_size, 0.0);
  const double nd = static_cast<double>(corpus.size());
  for (std::size_t t = 0; t < vocab_size; ++t)
    if (df[t] > 0) idf[t] = std::log(nd / static_cast<double>(df[t]));
  return idf;
}

/// Raw term count of `token` in document `doc` times ln(n_D / df(token)).
inline double tfidf(const std::vector<std::vector<TokenId>>& corpus,
                    std::size_t doc, TokenId token) {
  if (doc >= corpus.size()) throw UsageError("tfidf: document index out of range");
  std::size_t df = 0;
  for (const auto& d : corpus)
    if (std::find(d.begin(), d.end(), token) != d.end()) ++df;
  if (df == 0) return 0.0;
  auto tf = std::count(corpus[doc].begin(), corpus[doc].end(), token);
  return static_cast<double>(tf) *
         std::log(static_cast<double>(corpus.size()) / static_cast<double>(df));
}

/// Heterogeneous document/word graph. Node order: documents 0..n_D-1, then
/// word ids 3.. mapped to n_D + (id - 3).
struct CorpusGraph {
  std::size_t n_docs = 0;
  std::size_t n_words = 0;
  SparseMatrix raw;
  SparseMatrix normalized;
  Eigen::VectorXd degree;
  // Training idf by token id; empty when the graph was loaded from file.
  std::vector<double> idf;

  std::size_t n_nodes() const { return n_docs + n_words; }
  std::size_t word_node(TokenId id) const {
    return n_docs + static_cast<std::size_t>(id - kFirstWordId);
  }
  bool has_word(TokenId id) const {
    return Vocabulary::is_word(id) &&
           static_cast<std::size_t>(id - kFirstWordId) < n_words;
  }
};

namespace detail {

inline SparseMatrix symmetric_normalize(const SparseMatrix& a, Eigen::VectorXd& degree) {
  const Eigen::Index n = a.rows();
  degree = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) degree[r] += it.value();
  Eigen::VectorXd dinv(n);
  for (Eigen::Index i = 0; i < n; ++i)
    dinv[i] = degree[i] > 0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
  SparseMatrix out = a;
  for (Eigen::Index r = 0; r < n; ++r)
    for (SparseMatrix::InnerIterator it(out, r); it; ++it)
      // dinv_r * dinv_c is commutative, so (r,c) and (c,r) match bitwise.
      it.valueRef() = it.value() * (dinv[r] * dinv[it.col()]);
  return out;
}

}  // namespace detail

inline CorpusGraph graph_from_raw(std::size_t n_docs, std::size_t n_words,
                                  SparseMatrix raw) {
  CorpusGraph g;
  g.n_docs = n_docs;
  g.n_words = n_words;
  g.raw = std::move(raw);
  g.normalized = detail::symmetric_normalize(g.raw, g.degree);
  return g;
}

/// Word-word edges carry positive PMI, document-word edges TF-IDF, every
/// node a unit self-loop; everything else is zero (no document-document
/// edges). Returns raw and symmetrically normalized adjacency.
inline CorpusGraph build_adjacency(const std::vector<std::vector<TokenId>>& corpus,
                                   const WindowStats& stats, const Vocabulary& vocab) {
  const std::size_t n_docs = corpus.size();
  const std::size_t n_words = vocab.n_words();
  if (n_words == 0) throw DataError("build_adjacency: empty vocabulary");
  const std::size_t n = n_docs + n_words;

  auto word_node = [&](TokenId id) {
    return static_cast<int>(n_docs + static_cast<std::size_t>(id - kFirstWordId));
  };
  auto valid = [&](TokenId id) {
    return Vocabulary::is_word(id) &&
           static_cast<std::size_t>(id - kFirstWordId) < n_words;
  };

  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < n; ++i)
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);

  for (const auto& [pair, nij] : stats.pair_windows) {
    if (!valid(pair.first) || !valid(pair.second)) continue;
    double v = pmi(stats, pair.first, pair.second);
    if (!(v > 0)) continue;
    trip.emplace_back(word_node(pair.first), word_node(pair.second), v);
    trip.emplace_back(word_node(pair.second), word_node(pair.first), v);
  }

  std::vector<double> idf = inverse_document_frequency(corpus, vocab.size());
  for (std::size_t d = 0; d < n_docs; ++d) {
    std::map<TokenId, std::size_t> tf;
    for (TokenId t : corpus[d])
      if (valid(t)) ++tf[t];
    for (const auto& [t, c] : tf) {
      double v = static_cast<double>(c) * idf[static_cast<std::size_t>(t)];
      if (v == 0) continue;
      trip.emplace_back(static_cast<int>(d), word_node(t), v);
      trip.emplace_back(word_node(t), static_cast<int>(d), v);
    }
  }

  SparseMatrix raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  raw.setFromTriplets(trip.begin(), trip.end());
  raw.makeCompressed();
  CorpusGraph g = graph_from_raw(n_docs, n_words, std::move(raw));
  g.idf = std::move(idf);
  return g;
}

/// Sequence-aligned L_S x L_S adjacency for one document.
struct DocAdjacency {
  DenseMatrix matrix;
  std::size_t doc_index = 0;
};

/// Position 0 maps to the document node, word positions to their word nodes,
/// matrix(p,q) = Ã(node(p), node(q)). PAD and UNK positions only get a unit
/// self-loop.
inline DocAdjacency extract_document_adjacency(const CorpusGraph& graph,
                                               std::size_t doc,
                                               const TokenIdSequence& seq) {
  if (doc >= graph.n_docs)
    throw UsageError("extract_document_adjacency: document index out of range");
  const std::size_t len = seq.size();
  std::vector<long> node(len, -1);
  node[0] = static_cast<long>(doc);
  for (std::size_t p = 1; p < seq.true_length && p < len; ++p)
    if (graph.has_word(seq.ids[p])) node[p] = static_cast<long>(graph.word_node(seq.ids[p]));

  DocAdjacency out;
  out.doc_index = doc;
  out.matrix = DenseMatrix::Zero(static_cast<Eigen::Index>(len),
                                 static_cast<Eigen::Index>(len));
  for (std::size_t p = 0; p < len; ++p) {
    if (node[p] < 0) {
      out.matrix(p, p) = 1.0;
      continue;
    }
    for (std::size_t q = 0; q < len; ++q)
      if (node[q] >= 0) out.matrix(p, q) = graph.normalized.coeff(node[p], node[q]);
  }
  return out;
}

/// Adjacency for a document outside the graph corpus. Word-word entries come
/// from the training graph; the [cls] row uses tf-idf against training idf,
/// normalized as if the document node were appended (degree 1 + sum tf-idf)
/// while word degrees keep their training values.
inline DocAdjacency extract_unseen_document_adjacency(
    const CorpusGraph& graph, const std::vector<TokenId>& doc_tokens,
    const TokenIdSequence& seq) {
  if (graph.idf.empty())
    throw UsageError("extract_unseen_document_adjacency: graph has no idf table");
  std::map<TokenId, double> weight;
  for (TokenId t : doc_tokens)
    if (graph.has_word(t)) weight[t] += graph.idf[static_cast<std::size_t>(t)];
  double deg_doc = 1.0;
  for (const auto& [t, w] : weight) deg_doc += w;

  const std::size_t len = seq.size();
  std::vector<long> node(len, -1);
  for (std::size_t p = 1; p < seq.true_length && p < len; ++p)
    if (graph.has_word(seq.ids[p])) node[p] = static_cast<long>(graph.word_node(seq.ids[p]));

  DocAdjacency out;
  out.doc_index = graph.n_docs;
  out.matrix = DenseMatrix::Zero(static_cast<Eigen::Index>(len),
                                 static_cast<Eigen::Index>(len));
  out.matrix(0, 0) = 1.0 / deg_doc;
  for (std::size_t p = 1; p < len; ++p) {
    if (node[p] < 0) {
      out.matrix(p, p) = 1.0;
      continue;
    }
    auto it = weight.find(seq.ids[p]);
    if (it != weight.end() && it->second != 0) {
      double v = it->second * ((1.0 / std::sqrt(deg_doc)) *
                               (1.0 / std::sqrt(graph.degree[node[p]])));
      out.matrix(0, p) = v;
      out.matrix(p, 0) = v;
    }
    for (std::size_t q = 1; q < len; ++q)
      if (node[q] >= 0) out.matrix(p, q) = graph.normalized.coeff(node[p], node[q]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph file: "TEXTGCN v1 n_D n_W nnz" then upper-triangle "row col value".
// ---------------------------------------------------------------------------

inline void write_graph(const std::string& path, const CorpusGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write graph " + path);
  std::size_t nnz = 0;
  for (Eigen::Index r = 0; r < g.raw.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(g.raw, r); it; ++it)
      if (it.col() >= r) ++nnz;
  out << "TEXTGCN v1 " << g.n_docs << ' ' << g.n_words << ' ' << nnz << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < g.raw.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(g.raw, r); it; ++it)
      if (it.col() >= r) out << r << ' ' << it.col() << ' ' << it.value() << '\n';
}

inline CorpusGraph read_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read graph " + path);
  std::string magic, version;
  std::size_t n_docs = 0, n_words = 0, nnz = 0;
  if (!(in >> magic >> version >> n_docs >> n_words >> nnz) || magic != "TEXTGCN" ||
      version != "v1")
    throw DataError(path + ": bad graph header");
  const auto n = static_cast<Eigen::Index>(n_docs + n_words);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t k = 0; k < nnz; ++k) {
    Eigen::Index r, c;
    double v;
    if (!(in >> r >> c >> v)) throw DataError(path + ": truncated triplet list");
    if (r < 0 || c < r || c >= n) throw DataError(path + ": triplet out of range");
    trip.emplace_back(r, c, v);
    if (c != r) trip.emplace_back(c, r, v);
  }
  SparseMatrix raw(n, n);
  raw.setFromTriplets(trip.begin(), trip.end());
  raw.makeCompressed();
  return graph_from_raw(n_docs, n_words, std::move(raw));
}

}  // namespace gcanfuse
