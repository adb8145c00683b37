#include "shardsearch/segmenter.hpp"

#include "shardsearch/util/utf8.hpp"

namespace shardsearch {

std::vector<Snippet> segment(const RawDocument& doc, std::size_t max_words) {
  if (max_words < 1) throw ConfigError("max_words must be at least 1");
  const auto words = utf8::split_whitespace(doc.text);
  std::vector<Snippet> snippets;
  snippets.reserve((words.size() + max_words - 1) / max_words);
  for (std::size_t start = 0; start < words.size(); start += max_words) {
    const std::size_t end = std::min(words.size(), start + max_words);
    Snippet s;
    s.doc_id = doc.id;
    s.seq = snippets.size();
    s.word_count = end - start;
    s.meta = doc.meta;
    for (std::size_t i = start; i < end; ++i) {
      if (i != start) s.text.push_back(' ');
      s.text.append(words[i]);
    }
    snippets.push_back(std::move(s));
  }
  return snippets;
}

}  // namespace shardsearch
