#pragma once

// Exhaustive BM25 scorer used as the reference for the index and searcher.
// Works on already-analyzed term lists and shares no code with the engine.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct Hit {
  std::size_t ordinal;
  double score;
};

struct Bm25Oracle {
  std::vector<std::vector<std::string>> docs;  // analyzed terms per snippet
  double k1 = 0.9;
  double b = 0.4;

  double avgdl() const {
    double total = 0;
    for (const auto& d : docs) total += static_cast<double>(d.size());
    return total / static_cast<double>(docs.size());
  }

  std::size_t df(const std::string& term) const {
    std::size_t n = 0;
    for (const auto& d : docs)
      if (std::find(d.begin(), d.end(), term) != d.end()) ++n;
    return n;
  }

  std::size_t cf(const std::string& term) const {
    std::size_t n = 0;
    for (const auto& d : docs) n += static_cast<std::size_t>(std::count(d.begin(), d.end(), term));
    return n;
  }

  // Every snippet scored; snippets with no query term are left out.
  std::vector<Hit> rank(const std::vector<std::string>& query, std::size_t k) const {
    std::vector<std::string> distinct;
    for (const auto& t : query)
      if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
    const double n = static_cast<double>(docs.size());
    const double avg = avgdl();
    std::map<std::string, double> idf;
    for (const auto& t : distinct) {
      const double d = static_cast<double>(df(t));
      idf[t] = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    }
    std::vector<Hit> hits;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      double score = 0;
      bool matched = false;
      for (const auto& t : distinct) {
        const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
        if (tf == 0) continue;
        matched = true;
        const double len = static_cast<double>(docs[i].size());
        score += idf[t] * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
      }
      if (matched) hits.push_back({i, score});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) { return x.score > y.score; });
    if (hits.size() > k) hits.resize(k);
    return hits;
  }
};

inline bool close(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace oracle
