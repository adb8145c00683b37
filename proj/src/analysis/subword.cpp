#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "shardsearch/analysis.hpp"
#include "shardsearch/util/digest.hpp"
#include "shardsearch/util/utf8.hpp"

namespace shardsearch {
namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::string pair_key(std::string_view left, std::string_view right) {
  std::string key = std::to_string(left.size());
  key.push_back(':');
  key.append(left);
  key.append(right);
  return key;
}

std::string byte_token(unsigned char byte) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "<0x%02X>", byte);
  return buf;
}

std::string read_all(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnalyzerError(std::string("cannot read ") + what + " file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

SubwordModel parse_subword_model(std::string_view vocab_text, std::string_view merges_text,
                                 UnknownPolicy policy) {
  SubwordModel model;
  model.unknown_policy = policy;

  const auto vocab_lines = lines_of(vocab_text);
  for (std::size_t i = 0; i < vocab_lines.size(); ++i) {
    std::string token(vocab_lines[i]);
    if (token.empty()) throw AnalyzerError("vocabulary line " + std::to_string(i + 1) + " is empty");
    if (i > std::numeric_limits<std::uint32_t>::max()) throw AnalyzerError("vocabulary too large");
    if (!model.vocabulary.emplace(token, static_cast<std::uint32_t>(i)).second)
      throw AnalyzerError("duplicate vocabulary entry '" + token + "' at line " +
                          std::to_string(i + 1));
    model.tokens.push_back(std::move(token));
  }

  const auto merge_lines = lines_of(merges_text);
  for (std::size_t i = 0; i < merge_lines.size(); ++i) {
    auto line = merge_lines[i];
    if (i == 0 && line.starts_with("#version")) continue;
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string_view::npos || space == 0 || space + 1 >= line.size() ||
        line.find(' ', space + 1) != std::string_view::npos)
      throw AnalyzerError("merges line " + std::to_string(i + 1) +
                          " is not two space-separated symbols");
    std::string left(line.substr(0, space));
    std::string right(line.substr(space + 1));
    if (!model.vocabulary.contains(left + right))
      throw AnalyzerError("merge (" + left + ", " + right + ") at line " + std::to_string(i + 1) +
                          " produces '" + left + right + "' which is not in the vocabulary");
    model.merges.emplace_back(std::move(left), std::move(right));
  }
  return model;
}

SubwordModel load_subword_model(const std::filesystem::path& vocab_path,
                                const std::filesystem::path& merges_path, UnknownPolicy policy) {
  return parse_subword_model(read_all(vocab_path, "vocabulary"), read_all(merges_path, "merges"),
                             policy);
}

SubwordAnalyzer::SubwordAnalyzer(std::string vocab_text, std::string merges_text,
                                 UnknownPolicy policy)
    : Analyzer(AnalyzerKind::subword,
               {{"kind", "subword"},
                {"unknown_policy", to_string(policy)},
                {"vocab_sha256", sha256_hex(vocab_text)},
                {"merges_sha256", sha256_hex(merges_text)}}),
      vocab_text_(std::move(vocab_text)),
      merges_text_(std::move(merges_text)),
      model_(parse_subword_model(vocab_text_, merges_text_, policy)) {
  for (std::size_t rank = 0; rank < model_.merges.size(); ++rank) {
    const auto& [left, right] = model_.merges[rank];
    // A repeated pair keeps its first (highest-priority) rank.
    ranks_.emplace(pair_key(left, right), static_cast<std::uint32_t>(rank));
  }
}

std::vector<std::string> SubwordAnalyzer::merge_piece(std::string_view piece) const {
  std::vector<std::string> symbols;
  std::size_t pos = 0;
  while (pos < piece.size()) {
    const auto start = pos;
    utf8::next(piece, pos);
    symbols.emplace_back(piece.substr(start, pos - start));
  }

  while (symbols.size() > 1) {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != ranks_.end() && it->second < best) best = it->second;
    }
    if (best == std::numeric_limits<std::uint32_t>::max()) break;

    const auto& [left, right] = model_.merges[best];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(std::move(symbols[i]));
        ++i;
      }
    }
    symbols = std::move(merged);
  }
  return symbols;
}

std::vector<std::string> SubwordAnalyzer::analyze(std::string_view text) const {
  std::vector<std::string> out;
  for (auto piece : utf8::split_whitespace(text)) {
    for (auto& symbol : merge_piece(piece)) {
      if (model_.vocabulary.contains(symbol)) {
        out.push_back(std::move(symbol));
      } else if (model_.unknown_policy == UnknownPolicy::byte_fallback) {
        for (unsigned char byte : symbol) {
          auto token = byte_token(byte);
          if (model_.vocabulary.contains(token)) out.push_back(std::move(token));
        }
      }
    }
  }
  return out;
}

void SubwordAnalyzer::save_resources(const std::filesystem::path& dir) const {
  for (const auto& [name, text] : {std::pair{kVocabFile, &vocab_text_}, {kMergesFile, &merges_text_}}) {
    std::ofstream out(dir / name, std::ios::binary);
    out << *text;
    if (!out) throw IndexError("cannot write " + (dir / name).string());
  }
}

}  // namespace shardsearch
