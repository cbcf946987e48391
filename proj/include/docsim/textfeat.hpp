#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "docsim/error.hpp"
#include "docsim/hash.hpp"
#include "docsim/sparse.hpp"

namespace docsim {

// Deterministic text-to-feature chain:
//   clean -> tokenize -> remove_stopwords -> [ngrams] -> hashing_tf -> idf.
// Identical raw text produces a bit-identical SparseVector on every platform.

using TokenSeq = std::vector<std::string>;

inline constexpr uint32_t kFeatureHashSeed = 42;
inline constexpr int32_t kDefaultFeatureDim = 1 << 14;  // 16384

namespace detail {
inline bool is_alnum_ascii(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}
inline bool is_word_char(unsigned char c) {
  return is_alnum_ascii(c) || c == '_';
}
}  // namespace detail

/// Lowercases (ASCII) and collapses every run of non-alphanumeric bytes to a
/// single space, trimming the ends. Total on arbitrary byte strings; bytes
/// outside ASCII count as separators.
inline std::string clean(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (detail::is_alnum_ascii(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                         : static_cast<char>(c));
    } else {
      pending_space = true;
    }
  }
  return out;
}

/// Splits on runs of non-word characters (word = [A-Za-z0-9_]); empty tokens
/// are dropped.
inline TokenSeq tokenize(std::string_view cleaned) {
  TokenSeq tokens;
  size_t i = 0;
  const size_t n = cleaned.size();
  while (i < n) {
    while (i < n && !detail::is_word_char(static_cast<unsigned char>(cleaned[i])))
      ++i;
    size_t start = i;
    while (i < n && detail::is_word_char(static_cast<unsigned char>(cleaned[i])))
      ++i;
    if (i > start) tokens.emplace_back(cleaned.substr(start, i - start));
  }
  return tokens;
}

inline TokenSeq remove_stopwords(const TokenSeq& tokens,
                                 const std::unordered_set<std::string>& stoplist) {
  TokenSeq out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (!stoplist.count(t)) out.push_back(t);
  return out;
}

/// Sliding windows of n consecutive tokens joined by single spaces. n = 1
/// returns the token list itself.
inline std::vector<std::string> ngrams(const TokenSeq& tokens, int n) {
  if (n < 1) throw ParamError("ngrams: n must be >= 1");
  std::vector<std::string> out;
  if (tokens.size() < static_cast<size_t>(n)) return out;
  out.reserve(tokens.size() - static_cast<size_t>(n) + 1);
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (size_t j = 1; j < static_cast<size_t>(n); ++j) {
      gram.push_back(' ');
      gram += tokens[i + j];
    }
    out.push_back(std::move(gram));
  }
  return out;
}

/// Feature index of a term: MurmurHash3 x86_32 over the UTF-8 bytes with
/// seed 42, interpreted as a signed 32-bit value, mapped by
/// ((h mod d) + d) mod d.
inline int32_t term_index(std::string_view term, int32_t dim) {
  const auto h = static_cast<int32_t>(murmur3_x86_32(term, kFeatureHashSeed));
  const int64_t d = dim;
  return static_cast<int32_t>(((static_cast<int64_t>(h) % d) + d) % d);
}

/// Hashed term-frequency vector: raw occurrence counts of all terms that map
/// to each index.
inline SparseVector hashing_tf(const std::vector<std::string>& terms,
                               int32_t dim) {
  if (dim < 1) throw ParamError("hashing_tf: dim must be >= 1");
  std::vector<std::pair<int32_t, double>> pairs;
  pairs.reserve(terms.size());
  for (const auto& t : terms) pairs.emplace_back(term_index(t, dim), 1.0);
  return SparseVector::from_pairs(dim, std::move(pairs));
}

/// Smoothed inverse-document-frequency model over a featurized corpus.
struct IdfModel {
  int32_t dim = 0;
  int64_t doc_count = 0;
  std::vector<int64_t> doc_freq;  // documents with a nonzero at each index
  std::vector<double> weights;    // ln((N+1)/(df+1))

  static IdfModel from_doc_freq(int32_t dim, int64_t doc_count,
                                std::vector<int64_t> doc_freq) {
    IdfModel m;
    m.dim = dim;
    m.doc_count = doc_count;
    m.doc_freq = std::move(doc_freq);
    m.weights.resize(static_cast<size_t>(dim));
    for (size_t i = 0; i < m.weights.size(); ++i) {
      m.weights[i] = std::log(static_cast<double>(doc_count + 1) /
                              static_cast<double>(m.doc_freq[i] + 1));
    }
    return m;
  }
};

inline IdfModel fit_idf(std::span<const SparseVector> corpus) {
  if (corpus.empty()) throw DataError("fit_idf: empty corpus");
  const int32_t dim = corpus.front().dim;
  std::vector<int64_t> df(static_cast<size_t>(dim), 0);
  for (const auto& v : corpus) {
    if (v.dim != dim) throw ParamError("fit_idf: mixed dims in corpus");
    for (int32_t i : v.idx) ++df[static_cast<size_t>(i)];
  }
  return IdfModel::from_doc_freq(dim, static_cast<int64_t>(corpus.size()),
                                 std::move(df));
}

/// Elementwise reweighting by the IDF model; entries whose product is zero
/// are dropped.
inline SparseVector apply_idf(const IdfModel& model, const SparseVector& v) {
  if (v.dim != model.dim) throw ParamError("apply_idf: dim mismatch");
  SparseVector out;
  out.dim = v.dim;
  for (size_t i = 0; i < v.idx.size(); ++i) {
    const double w = v.val[i] * model.weights[static_cast<size_t>(v.idx[i])];
    if (w != 0.0) {
      out.idx.push_back(v.idx[i]);
      out.val.push_back(w);
    }
  }
  return out;
}

/// Term stream for one document: unigrams after cleaning and stopword
/// removal, plus n-grams hashed into the same space when ngram_n > 1.
inline std::vector<std::string> extract_terms(
    std::string_view raw, const std::unordered_set<std::string>& stoplist,
    int ngram_n) {
  if (ngram_n < 1) throw ParamError("extract_terms: ngram_n must be >= 1");
  TokenSeq tokens = remove_stopwords(tokenize(clean(raw)), stoplist);
  if (ngram_n == 1) return tokens;
  std::vector<std::string> terms = tokens;
  auto grams = ngrams(tokens, ngram_n);
  terms.insert(terms.end(), std::make_move_iterator(grams.begin()),
               std::make_move_iterator(grams.end()));
  return terms;
}

}  // namespace docsim
