#include <algorithm>
#include <limits>

#include "segment_writer.hpp"

namespace shardsearch {

InvertedBuffer::InvertedBuffer(std::shared_ptr<const Analyzer> analyzer, std::size_t max_words,
                               Bm25Params bm25)
    : analyzer_(std::move(analyzer)), max_words_(max_words), bm25_(bm25) {
  if (!analyzer_) throw IndexError("inverted buffer needs an analyzer");
}

void InvertedBuffer::add(const Snippet& snippet, std::uint64_t source_position) {
  if (lengths_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw IndexError("segment is full");
  const auto ordinal = static_cast<std::uint32_t>(lengths_.size());

  auto terms = analyzer_->analyze(snippet.text);
  lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
  std::sort(terms.begin(), terms.end());
  for (std::size_t i = 0; i < terms.size();) {
    std::size_t j = i + 1;
    while (j < terms.size() && terms[j] == terms[i]) ++j;
    postings_[terms[i]].push_back({ordinal, static_cast<std::uint32_t>(j - i)});
    i = j;
  }

  store_lines_.push_back(detail::store_line(
      {snippet.id(), snippet.doc_id, snippet.seq, source_position, snippet.text, snippet.meta}));
}

void InvertedBuffer::flush(const std::filesystem::path& dir, WriteBudget* budget) {
  detail::SegmentData data;
  data.store_lines = std::move(store_lines_);
  data.lengths = std::move(lengths_);
  data.terms.reserve(postings_.size());
  for (auto& [term, list] : postings_) data.terms.emplace_back(term, std::move(list));
  std::sort(data.terms.begin(), data.terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  store_lines_.clear();
  lengths_.clear();
  postings_.clear();
  detail::write_segment(dir, *analyzer_, max_words_, bm25_, data, budget);
}

}  // namespace shardsearch
