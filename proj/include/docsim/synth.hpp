#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "docsim/error.hpp"
#include "docsim/rng.hpp"
#include "docsim/simjoin.hpp"

namespace docsim {

/// Synthetic corpus generator: documents drawn from per-topic vocabularies,
/// with a dup_rate fraction rewritten as mutated near-copies of a document
/// from another state. The ground-truth copy pairs are written alongside so
/// blocking recall can be measured. Byte-reproducible for a fixed seed.
struct SynthParams {
  int n_docs = 1000;
  int n_states = 8;
  int n_topics = 10;
  double dup_rate = 0.1;
  uint64_t seed = 13;
};

struct SynthResult {
  size_t docs = 0;
  std::vector<CandidatePair> truth_pairs;  // canonical orientation
  std::filesystem::path manifest;
  std::filesystem::path truth_file;
  std::filesystem::path docs_dir;
};

namespace detail {

inline const std::vector<std::string>& state_codes() {
  static const std::vector<std::string> codes{
      "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA",
      "HI", "ID", "IL", "IN", "IA", "KS", "KY", "LA", "ME", "MD",
      "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ",
      "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC",
      "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY"};
  return codes;
}

inline std::string make_word(Rng& rng) {
  static const char* consonants = "bcdfghjklmnprstvz";
  static const char* vowels = "aeiou";
  const size_t syllables = 2 + rng.index(3);
  std::string w;
  for (size_t s = 0; s < syllables; ++s) {
    w.push_back(consonants[rng.index(17)]);
    w.push_back(vowels[rng.index(5)]);
    if (rng.chance(0.3)) w.push_back(consonants[rng.index(17)]);
  }
  return w;
}

}  // namespace detail

inline SynthResult synth_corpus(const SynthParams& params,
                                const std::filesystem::path& out_dir) {
  if (params.n_docs < 1 || params.n_states < 1 || params.n_topics < 1)
    throw ParamError("synth_corpus: counts must be positive");
  if (params.n_states > static_cast<int>(detail::state_codes().size()))
    throw ParamError("synth_corpus: at most 50 states");
  if (params.dup_rate < 0.0 || params.dup_rate > 1.0)
    throw ParamError("synth_corpus: dup_rate must be in [0, 1]");

  Rng rng(params.seed);

  // Vocabularies: one shared pool plus a disjoint-by-construction pool per
  // topic. Function-word filler exercises stopword removal downstream.
  const std::vector<std::string> filler{"the", "of",   "and", "to",   "in",
                                        "for", "by",   "on",  "with", "as",
                                        "is",  "this", "that", "be",  "or"};
  std::vector<std::string> common;
  for (int i = 0; i < 300; ++i) common.push_back(detail::make_word(rng));
  std::vector<std::vector<std::string>> topics(
      static_cast<size_t>(params.n_topics));
  for (auto& pool : topics) {
    pool.reserve(250);
    for (int i = 0; i < 250; ++i) pool.push_back(detail::make_word(rng));
  }

  std::filesystem::create_directories(out_dir);
  const auto docs_dir = out_dir / "docs";
  std::filesystem::create_directories(docs_dir);

  struct Doc {
    std::string pk;
    std::string state;
    int64_t year;
    std::string docversion;
    int topic;
    std::vector<std::string> words;
  };
  std::vector<Doc> docs;
  docs.reserve(static_cast<size_t>(params.n_docs));
  SynthResult result;

  for (int i = 0; i < params.n_docs; ++i) {
    Doc d;
    d.state = detail::state_codes()[rng.index(static_cast<size_t>(params.n_states))];
    d.year = 2001 + static_cast<int64_t>(rng.index(15));
    d.docversion = (rng.chance(0.5) ? "SB" : "HB") + std::to_string(100 + i);
    d.pk = d.state + "/" + std::to_string(d.year) + "/" + d.docversion;

    const bool wants_copy = rng.chance(params.dup_rate);
    int base = -1;
    if (wants_copy) {
      std::vector<int> eligible;
      for (int j = 0; j < i; ++j)
        if (docs[static_cast<size_t>(j)].state != d.state) eligible.push_back(j);
      if (!eligible.empty())
        base = eligible[rng.index(eligible.size())];
    }

    if (base >= 0) {
      const Doc& src = docs[static_cast<size_t>(base)];
      d.topic = src.topic;
      const auto& pool = topics[static_cast<size_t>(d.topic)];
      for (const auto& w : src.words) {
        const double u = rng.uniform();
        if (u < 0.06) continue;                       // deletion
        if (u < 0.12) d.words.push_back(rng.pick(pool));  // swap
        else d.words.push_back(w);
      }
      const auto& a = src.pk < d.pk ? src.pk : d.pk;
      const auto& b = src.pk < d.pk ? d.pk : src.pk;
      result.truth_pairs.push_back({a, b});
    } else {
      d.topic = static_cast<int>(rng.index(static_cast<size_t>(params.n_topics)));
      const auto& pool = topics[static_cast<size_t>(d.topic)];
      const size_t len = 120 + rng.index(161);
      d.words.reserve(len);
      for (size_t w = 0; w < len; ++w) {
        const double u = rng.uniform();
        if (u < 0.30) d.words.push_back(rng.pick(filler));
        else if (u < 0.50) d.words.push_back(rng.pick(common));
        else d.words.push_back(rng.pick(pool));
      }
    }
    docs.push_back(std::move(d));
  }

  // Write documents (13 words per line) and the manifest.
  const auto manifest_path = out_dir / "manifest.csv";
  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest)
    throw DataError("cannot write manifest: " + manifest_path.string());
  manifest << "path,state,year,docversion\n";
  for (const auto& d : docs) {
    const std::string fname =
        d.state + "_" + std::to_string(d.year) + "_" + d.docversion + ".txt";
    std::ofstream os(docs_dir / fname, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write document: " + fname);
    for (size_t w = 0; w < d.words.size(); ++w) {
      os << d.words[w];
      os << ((w % 13 == 12 || w + 1 == d.words.size()) ? '\n' : ' ');
    }
    manifest << "docs/" << fname << ',' << d.state << ',' << d.year << ','
             << d.docversion << '\n';
  }
  manifest.close();

  const auto truth_path = out_dir / "truth_pairs.csv";
  std::ofstream truth(truth_path, std::ios::trunc);
  if (!truth) throw DataError("cannot write truth pairs: " + truth_path.string());
  truth << "pk1,pk2\n";
  for (const auto& p : result.truth_pairs)
    truth << p.left << ',' << p.right << '\n';
  truth.close();

  result.docs = docs.size();
  result.manifest = manifest_path;
  result.truth_file = truth_path;
  result.docs_dir = docs_dir;
  return result;
}

inline std::vector<CandidatePair> load_truth_pairs(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open truth pairs: " + path.string());
  std::string line;
  if (!std::getline(is, line) || (line != "pk1,pk2" && line != "pk1,pk2\r"))
    throw DataError("truth pairs missing 'pk1,pk2' header: " + path.string());
  std::vector<CandidatePair> pairs;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = line.find(',');
    if (c == std::string::npos)
      throw DataError("bad truth pair row: " + line);
    pairs.push_back({line.substr(0, c), line.substr(c + 1)});
  }
  return pairs;
}

}  // namespace docsim
