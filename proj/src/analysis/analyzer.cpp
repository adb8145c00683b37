#include <fstream>
#include <sstream>

#include <unicode/uchar.h>

#include "shardsearch/analysis.hpp"
#include "shardsearch/util/digest.hpp"
#include "shardsearch/util/utf8.hpp"

namespace shardsearch {
namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnalyzerError(std::string("cannot read ") + what + " file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool is_folded(std::string_view term) {
  std::size_t pos = 0;
  while (pos < term.size()) {
    const char32_t cp = utf8::next(term, pos);
    if (cp == utf8::kInvalid) return false;
    if (static_cast<char32_t>(u_foldCase(static_cast<UChar32>(cp), U_FOLD_CASE_DEFAULT)) != cp)
      return false;
  }
  return true;
}

}  // namespace

UnknownPolicy parse_unknown_policy(std::string_view name) {
  if (name == "byte_fallback") return UnknownPolicy::byte_fallback;
  if (name == "drop") return UnknownPolicy::drop;
  throw AnalyzerError("unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(UnknownPolicy policy) {
  return policy == UnknownPolicy::byte_fallback ? "byte_fallback" : "drop";
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",    "and",  "are",  "as",    "at",   "be",   "but",  "by",
      "for",  "if",    "in",   "into", "is",    "it",   "no",   "not",  "of",
      "on",   "or",    "such", "that", "the",   "their", "then", "there", "these",
      "they", "this",  "to",   "was",  "will",  "with"};
  return words;
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::istringstream in(read_file(path, "stopword"));
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

AnalyzerConfig AnalyzerConfig::simple(std::set<std::string> stopwords, bool stemming) {
  AnalyzerConfig c;
  c.kind = AnalyzerKind::simple;
  c.stopwords = std::move(stopwords);
  c.stemming = stemming;
  return c;
}

AnalyzerConfig AnalyzerConfig::subword(std::filesystem::path vocab, std::filesystem::path merges,
                                       UnknownPolicy policy) {
  AnalyzerConfig c;
  c.kind = AnalyzerKind::subword;
  c.vocab_path = std::move(vocab);
  c.merges_path = std::move(merges);
  c.unknown_policy = policy;
  return c;
}

void AnalyzerConfig::validate() const {
  if (kind == AnalyzerKind::simple) {
    if (!vocab_path.empty() || !merges_path.empty())
      throw AnalyzerError("simple analyzer takes no vocabulary or merges");
    for (const auto& w : stopwords) {
      if (w.empty()) throw AnalyzerError("empty stopword");
      if (!is_folded(w)) throw AnalyzerError("stopword '" + w + "' is not lowercase");
    }
  } else {
    if (vocab_path.empty() || merges_path.empty())
      throw AnalyzerError("subword analyzer needs both vocabulary and merges files");
    if (!stopwords.empty() || stemming)
      throw AnalyzerError("subword analyzer takes no stopwords or stemming");
  }
}

Analyzer::Analyzer(AnalyzerKind kind, nlohmann::json canonical)
    : kind_(kind), canonical_(std::move(canonical)), digest_(sha256_hex(canonical_.dump())) {}

void Analyzer::save_resources(const std::filesystem::path&) const {}

std::shared_ptr<const Analyzer> make_analyzer(const AnalyzerConfig& config) {
  config.validate();
  if (config.kind == AnalyzerKind::simple)
    return std::make_shared<SimpleAnalyzer>(config.stopwords, config.stemming);
  return std::make_shared<SubwordAnalyzer>(read_file(config.vocab_path, "vocabulary"),
                                           read_file(config.merges_path, "merges"),
                                           config.unknown_policy);
}

std::shared_ptr<const Analyzer> analyzer_from_canonical(const nlohmann::json& canonical,
                                                        const std::filesystem::path& resource_dir,
                                                        const std::string& expected_digest) {
  std::shared_ptr<const Analyzer> analyzer;
  try {
    const auto kind = canonical.at("kind").get<std::string>();
    if (kind == "simple") {
      analyzer = std::make_shared<SimpleAnalyzer>(
          canonical.at("stopwords").get<std::set<std::string>>(),
          canonical.at("stemming").get<bool>());
    } else if (kind == "subword") {
      analyzer = std::make_shared<SubwordAnalyzer>(
          read_file(resource_dir / kVocabFile, "vocabulary"),
          read_file(resource_dir / kMergesFile, "merges"),
          parse_unknown_policy(canonical.at("unknown_policy").get<std::string>()));
    } else {
      throw AnalyzerError("unknown analyzer kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw AnalyzerError(std::string("bad analyzer description: ") + e.what());
  }
  if (analyzer->digest() != expected_digest)
    throw AnalyzerError("analyzer digest mismatch: expected " + expected_digest + ", got " +
                        analyzer->digest());
  return analyzer;
}

std::vector<std::string> analyze(const AnalyzerConfig& config, std::string_view text) {
  return make_analyzer(config)->analyze(text);
}

}  // namespace shardsearch
