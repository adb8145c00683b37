#include "shardsearch/searcher.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_set>

namespace shardsearch {

Query make_query(const Analyzer& analyzer, std::string raw, std::size_t k) {
  Query q;
  q.terms = analyzer.analyze(raw);
  q.raw = std::move(raw);
  q.k = k;
  q.analyzer_digest = analyzer.digest();
  return q;
}

double bm25_idf(std::uint64_t snippet_count, std::uint64_t df) {
  const double n = static_cast<double>(snippet_count);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_term_score(double idf, std::uint32_t tf, std::uint32_t length, double avgdl,
                       const Bm25Params& params) {
  const double f = static_cast<double>(tf);
  const double norm = 1.0 - params.b + params.b * static_cast<double>(length) / avgdl;
  return idf * f * (params.k1 + 1.0) / (f + params.k1 * norm);
}

std::vector<ScoredHit> score_bm25(const Segment& segment, const Query& query) {
  if (query.k < 1) throw QueryError("k must be at least 1");
  if (query.analyzer_digest != segment.manifest().analyzer_digest)
    throw QueryError("query was analyzed with a different analyzer than the index " +
                     segment.dir().string());

  std::vector<std::string> terms;
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : query.terms)
      if (seen.insert(t).second) terms.push_back(t);
  }

  const auto n = segment.snippet_count();
  const auto avgdl = segment.avgdl();
  const auto& params = segment.manifest().bm25;
  const auto& lengths = segment.lengths();

  std::vector<double> scores;
  std::vector<std::uint32_t> touched;
  std::vector<std::vector<Posting>> lists(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto* entry = segment.find(terms[t]);
    if (entry == nullptr) continue;
    if (scores.empty()) scores.assign(n, -1.0);
    lists[t] = segment.postings(entry->term_id);
    const double idf = bm25_idf(n, entry->df);
    for (const auto& p : lists[t]) {
      double& s = scores[p.ordinal];
      if (s < 0.0) {
        s = 0.0;
        touched.push_back(p.ordinal);
      }
      s += bm25_term_score(idf, p.tf, lengths[p.ordinal], avgdl, params);
    }
  }

  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const auto k = std::min(query.k, touched.size());
  std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(k), touched.end(),
                    better);

  std::vector<ScoredHit> hits;
  hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto ordinal = touched[i];
    ScoredHit hit;
    hit.ordinal = ordinal;
    hit.score = scores[ordinal];
    hit.rank = i + 1;
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const auto& list = lists[t];
      auto it = std::lower_bound(list.begin(), list.end(), ordinal,
                                 [](const Posting& p, std::uint32_t o) { return p.ordinal < o; });
      if (it != list.end() && it->ordinal == ordinal) hit.matched_terms.push_back(terms[t]);
    }
    hits.push_back(std::move(hit));
  }
  for (auto& hit : hits) hit.id = segment.snippet(hit.ordinal).id;
  return hits;
}

std::vector<BatchResult> batch_search(const Segment& segment, std::span<const Query> queries,
                                      std::size_t jobs) {
  std::vector<BatchResult> out(queries.size());
  auto run = [&](std::size_t i) {
    try {
      out[i].hits = score_bm25(segment, queries[i]);
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, queries.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < jobs; ++t) {
    threads.emplace_back([&] {
      for (auto i = next++; i < queries.size(); i = next++) run(i);
    });
  }
  for (auto& t : threads) t.join();
  return out;
}

std::vector<ResultHit> hydrate(const Segment& segment, const std::vector<ScoredHit>& hits) {
  std::vector<ResultHit> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    auto stored = segment.snippet(h.ordinal);
    out.push_back({std::move(stored.id), h.score, h.rank, std::move(stored.text),
                   std::move(stored.meta), h.matched_terms});
  }
  return out;
}

Searcher::Searcher(std::shared_ptr<const Segment> segment) : segment_(std::move(segment)) {
  if (!segment_) throw QueryError("searcher needs a segment");
}

Query Searcher::query(std::string raw, std::size_t k) const {
  return make_query(segment_->analyzer(), std::move(raw), k);
}

std::vector<ScoredHit> Searcher::search(std::string raw, std::size_t k) const {
  return score_bm25(*segment_, query(std::move(raw), k));
}

std::vector<ResultHit> Searcher::search_hydrated(std::string raw, std::size_t k) const {
  return hydrate(*segment_, search(std::move(raw), k));
}

}  // namespace shardsearch
