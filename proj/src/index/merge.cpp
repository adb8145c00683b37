#include <algorithm>
#include <unordered_set>

#include "segment_writer.hpp"

namespace shardsearch {
namespace {

struct SnippetKey {
  std::uint64_t source_position;
  std::uint64_t seq;
  std::uint32_t segment;
  std::uint32_t ordinal;

  auto operator<=>(const SnippetKey&) const = default;
};

}  // namespace

std::shared_ptr<const Segment> merge_segments(std::span<const std::shared_ptr<const Segment>> segments,
                                              const std::filesystem::path& out_dir,
                                              WriteBudget* budget) {
  if (segments.empty()) throw IndexError("nothing to merge");
  const auto& first = segments.front()->manifest();
  for (const auto& seg : segments) {
    const auto& m = seg->manifest();
    if (m.analyzer_digest != first.analyzer_digest)
      throw IndexError("analyzer digest mismatch: " + seg->dir().string() + " was built with " +
                       m.analyzer_digest + ", expected " + first.analyzer_digest);
    if (m.max_words != first.max_words)
      throw IndexError("snippet word limit mismatch in " + seg->dir().string());
    if (!(m.bm25 == first.bm25)) throw IndexError("BM25 parameter mismatch in " + seg->dir().string());
  }

  std::vector<SnippetKey> keys;
  std::unordered_set<std::string> ids;
  for (std::uint32_t s = 0; s < segments.size(); ++s) {
    const auto& seg = *segments[s];
    for (std::uint32_t o = 0; o < seg.snippet_count(); ++o) {
      auto snippet = seg.snippet(o);
      if (!ids.insert(snippet.id).second)
        throw IndexError("overlapping snippet id '" + snippet.id + "' in " + seg.dir().string());
      keys.push_back({snippet.source_position, snippet.seq, s, o});
    }
  }
  std::sort(keys.begin(), keys.end());

  std::vector<std::vector<std::uint32_t>> remap(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) remap[s].resize(segments[s]->snippet_count());

  detail::SegmentData data;
  data.store_lines.reserve(keys.size());
  data.lengths.reserve(keys.size());
  for (std::uint32_t i = 0; i < keys.size(); ++i) {
    const auto& k = keys[i];
    remap[k.segment][k.ordinal] = i;
    data.store_lines.emplace_back(segments[k.segment]->store_line(k.ordinal));
    data.lengths.push_back(segments[k.segment]->length(k.ordinal));
  }

  // Multiway merge of the sorted lexicons.
  std::vector<std::size_t> cursor(segments.size(), 0);
  while (true) {
    const std::string* next = nullptr;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto& lex = segments[s]->lexicon();
      if (cursor[s] < lex.size() && (next == nullptr || lex[cursor[s]].term < *next))
        next = &lex[cursor[s]].term;
    }
    if (next == nullptr) break;
    std::string term = *next;
    std::vector<Posting> list;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto& lex = segments[s]->lexicon();
      if (cursor[s] < lex.size() && lex[cursor[s]].term == term) {
        for (auto p : segments[s]->postings(static_cast<std::uint32_t>(cursor[s])))
          list.push_back({remap[s][p.ordinal], p.tf});
        ++cursor[s];
      }
    }
    std::sort(list.begin(), list.end(),
              [](const Posting& a, const Posting& b) { return a.ordinal < b.ordinal; });
    data.terms.emplace_back(std::move(term), std::move(list));
  }

  detail::write_segment(out_dir, segments.front()->analyzer(), first.max_words, first.bm25, data,
                        budget);
  return Segment::open(out_dir);
}

}  // namespace shardsearch
