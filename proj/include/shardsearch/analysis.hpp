#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shardsearch/error.hpp"

namespace shardsearch {

enum class AnalyzerKind { simple, subword };

// What the subword analyzer emits for a symbol missing from the vocabulary.
// byte_fallback emits one "<0xNN>" token per UTF-8 byte (each dropped if it
// is not itself in the vocabulary); drop discards the symbol.
enum class UnknownPolicy { byte_fallback, drop };

UnknownPolicy parse_unknown_policy(std::string_view name);
std::string_view to_string(UnknownPolicy policy);

// The 33-entry English list recorded in every index built with defaults.
const std::set<std::string>& default_stopwords();

// One term per line; blank lines are ignored.
std::set<std::string> load_stopwords(const std::filesystem::path& path);

struct AnalyzerConfig {
  AnalyzerKind kind = AnalyzerKind::simple;

  // simple only
  std::set<std::string> stopwords;
  bool stemming = false;

  // subword only
  std::filesystem::path vocab_path;
  std::filesystem::path merges_path;
  UnknownPolicy unknown_policy = UnknownPolicy::byte_fallback;

  static AnalyzerConfig simple(std::set<std::string> stopwords = default_stopwords(),
                               bool stemming = true);
  static AnalyzerConfig subword(std::filesystem::path vocab, std::filesystem::path merges,
                                UnknownPolicy policy = UnknownPolicy::byte_fallback);

  // Throws AnalyzerError unless exactly the fields for `kind` are set and
  // every stopword is non-empty and lowercase.
  void validate() const;
};

struct SubwordModel {
  std::vector<std::string> tokens;  // id = position
  std::unordered_map<std::string, std::uint32_t> vocabulary;
  std::vector<std::pair<std::string, std::string>> merges;  // rank = position
  UnknownPolicy unknown_policy = UnknownPolicy::byte_fallback;
};

// Vocabulary: one token per line, id = 0-based line number. Merges: one
// "left right" pair per line, rank = line order. A leading "#version" line
// in the merges file is ignored.
SubwordModel load_subword_model(const std::filesystem::path& vocab_path,
                                const std::filesystem::path& merges_path,
                                UnknownPolicy policy = UnknownPolicy::byte_fallback);
SubwordModel parse_subword_model(std::string_view vocab_text, std::string_view merges_text,
                                 UnknownPolicy policy = UnknownPolicy::byte_fallback);

// Porter English stemmer (reference implementation behaviour). Expects a
// lowercase ASCII word; words of length <= 2 are returned unchanged.
std::string stem(std::string_view term);

// Text -> terms. Immutable after construction; safe to share across threads.
class Analyzer {
 public:
  virtual ~Analyzer() = default;

  virtual std::vector<std::string> analyze(std::string_view text) const = 0;

  AnalyzerKind kind() const noexcept { return kind_; }

  // Canonical, path-independent description of the analyzer. Two analyzers
  // with equal digests produce identical output for every input.
  const nlohmann::json& canonical() const noexcept { return canonical_; }
  const std::string& digest() const noexcept { return digest_; }

  // Writes any model files the canonical description refers to.
  virtual void save_resources(const std::filesystem::path& dir) const;

 protected:
  Analyzer(AnalyzerKind kind, nlohmann::json canonical);

 private:
  AnalyzerKind kind_;
  nlohmann::json canonical_;
  std::string digest_;
};

class SimpleAnalyzer final : public Analyzer {
 public:
  SimpleAnalyzer(std::set<std::string> stopwords, bool stemming);

  std::vector<std::string> analyze(std::string_view text) const override;

 private:
  void emit(std::string& term, std::vector<std::string>& out) const;

  std::set<std::string> stopwords_;
  bool stemming_;
};

class SubwordAnalyzer final : public Analyzer {
 public:
  SubwordAnalyzer(std::string vocab_text, std::string merges_text, UnknownPolicy policy);

  std::vector<std::string> analyze(std::string_view text) const override;
  void save_resources(const std::filesystem::path& dir) const override;

  const SubwordModel& model() const noexcept { return model_; }

  // Merged symbols for one whitespace-free piece, before vocabulary lookup.
  std::vector<std::string> merge_piece(std::string_view piece) const;

 private:
  std::string vocab_text_;
  std::string merges_text_;
  SubwordModel model_;
  std::unordered_map<std::string, std::uint32_t> ranks_;
};

inline constexpr std::string_view kVocabFile = "vocab.txt";
inline constexpr std::string_view kMergesFile = "merges.txt";

std::shared_ptr<const Analyzer> make_analyzer(const AnalyzerConfig& config);

// Rebuilds an analyzer from its canonical description; subword model files
// are read from `resource_dir`. Throws AnalyzerError if the rebuilt digest
// differs from `expected_digest`.
std::shared_ptr<const Analyzer> analyzer_from_canonical(const nlohmann::json& canonical,
                                                        const std::filesystem::path& resource_dir,
                                                        const std::string& expected_digest);

std::vector<std::string> analyze(const AnalyzerConfig& config, std::string_view text);

}  // namespace shardsearch
