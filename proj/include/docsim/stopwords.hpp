#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>

#include "docsim/error.hpp"

namespace docsim {

// The frozen default English stopword list (174 words). The same list ships
// as data/stopwords_en.txt; a test keeps the two in sync.
inline const char* default_stopword_text() {
  return
      "i me my myself we our ours ourselves you your yours yourself "
      "yourselves he him his himself she her hers herself it its itself they "
      "them their theirs themselves what which who whom this that these "
      "those am is are was were be been being have has had having do does "
      "did doing would should could ought i'm you're he's she's it's we're "
      "they're i've you've we've they've i'd you'd he'd she'd we'd they'd "
      "i'll you'll he'll she'll we'll they'll isn't aren't wasn't weren't "
      "hasn't haven't hadn't doesn't don't didn't won't wouldn't shan't "
      "shouldn't can't cannot couldn't mustn't let's that's who's what's "
      "here's there's when's where's why's how's a an the and but if or "
      "because as until while of at by for with about against between into "
      "through during before after above below to from up down in out on "
      "off over under again further then once here there when where why how "
      "all any both each few more most other some such no nor not only own "
      "same so than too very";
}

inline const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = [] {
    std::unordered_set<std::string> s;
    std::istringstream is(default_stopword_text());
    std::string w;
    while (is >> w) s.insert(w);
    return s;
  }();
  return words;
}

// Loads a custom stoplist, one lowercase word per line; blank lines ignored.
inline std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open stoplist: " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

}  // namespace docsim
