#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shardsearch/index.hpp"

namespace shardsearch {

struct Query {
  std::string raw;
  std::vector<std::string> terms;  // analyzer output for `raw`
  std::size_t k = 10;
  std::string analyzer_digest;  // analyzer that produced `terms`
};

Query make_query(const Analyzer& analyzer, std::string raw, std::size_t k);

struct ScoredHit {
  std::uint32_t ordinal = 0;
  std::string id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
  std::vector<std::string> matched_terms;  // distinct query terms, query order

  bool operator==(const ScoredHit&) const = default;
};

// ln(1 + (N - df + 0.5) / (df + 0.5)); positive for every df in [1, N].
double bm25_idf(std::uint64_t snippet_count, std::uint64_t df);

// Contribution of one term occurrence count to a snippet's score.
double bm25_term_score(double idf, std::uint32_t tf, std::uint32_t length, double avgdl,
                       const Bm25Params& params);

// Top-k snippets by BM25 summed over the distinct query terms, ordered by
// score descending then ordinal ascending. Snippets matching no query term
// are never returned.
std::vector<ScoredHit> score_bm25(const Segment& segment, const Query& query);

struct BatchResult {
  std::vector<ScoredHit> hits;
  std::optional<std::string> error;
};

// Element-wise score_bm25; output order follows input order. `jobs` = 0
// uses the number of processors.
std::vector<BatchResult> batch_search(const Segment& segment, std::span<const Query> queries,
                                      std::size_t jobs = 0);

// A hit joined with its stored snippet, ready to leave the process.
struct ResultHit {
  std::string id;
  double score = 0.0;
  std::size_t rank = 0;
  std::string text;
  Meta meta;
  std::vector<std::string> matched_terms;

  bool operator==(const ResultHit&) const = default;
};

std::vector<ResultHit> hydrate(const Segment& segment, const std::vector<ScoredHit>& hits);

// Convenience wrapper that analyzes raw text with the segment's own analyzer.
class Searcher {
 public:
  explicit Searcher(std::shared_ptr<const Segment> segment);

  Query query(std::string raw, std::size_t k) const;
  std::vector<ScoredHit> search(std::string raw, std::size_t k) const;
  std::vector<ResultHit> search_hydrated(std::string raw, std::size_t k) const;

  const Segment& segment() const noexcept { return *segment_; }

 private:
  std::shared_ptr<const Segment> segment_;
};

}  // namespace shardsearch
