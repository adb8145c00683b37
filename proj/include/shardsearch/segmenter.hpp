#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "shardsearch/corpus.hpp"

namespace shardsearch {

// Longest snippet a document is cut into, in whitespace-delimited words.
inline constexpr std::size_t kDefaultSnippetWords = 256;

struct Snippet {
  std::string doc_id;
  std::size_t seq = 0;
  std::string text;  // words joined by single spaces
  std::size_t word_count = 0;
  Meta meta;

  // "<doc_id>#<seq>"
  std::string id() const { return doc_id + "#" + std::to_string(seq); }

  bool operator==(const Snippet&) const = default;
};

// Cuts the document into consecutive, non-overlapping runs of `max_words`
// words (the last run may be shorter). A word is a maximal run of
// non-whitespace code points. Every snippet inherits the document's meta.
std::vector<Snippet> segment(const RawDocument& doc, std::size_t max_words = kDefaultSnippetWords);

}  // namespace shardsearch
