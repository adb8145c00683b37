#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "shardsearch/analysis.hpp"
#include "shardsearch/corpus.hpp"
#include "shardsearch/segmenter.hpp"
#include "shardsearch/util/mapped_file.hpp"

namespace shardsearch {

struct Posting {
  std::uint32_t ordinal = 0;  // dense snippet id within a segment
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

struct LexiconEntry {
  std::string term;
  std::uint32_t term_id = 0;
  std::uint64_t df = 0;
  std::uint64_t cf = 0;

  bool operator==(const LexiconEntry&) const = default;
};

struct TermStats {
  std::uint64_t df = 0;
  std::uint64_t cf = 0;

  bool operator==(const TermStats&) const = default;
};

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;

  bool operator==(const Bm25Params&) const = default;
};

struct StoredSnippet {
  std::string id;  // "<doc_id>#<seq>"
  std::string doc_id;
  std::uint64_t seq = 0;
  // Ordinal of the parent document in the ingestion run that produced it;
  // merges order snippets by (source_position, seq).
  std::uint64_t source_position = 0;
  std::string text;
  Meta meta;
};

inline constexpr int kFormatVersion = 1;

namespace segment_files {
inline constexpr std::string_view manifest = "manifest.json";
inline constexpr std::string_view lexicon = "lexicon.tsv";
inline constexpr std::string_view postings = "postings.bin";
inline constexpr std::string_view lengths = "lengths.bin";
inline constexpr std::string_view store = "store.jsonl";
}  // namespace segment_files

struct FileEntry {
  std::uint64_t bytes = 0;
  std::string sha256;

  bool operator==(const FileEntry&) const = default;
};

struct Manifest {
  int format_version = kFormatVersion;
  nlohmann::json analyzer;
  std::string analyzer_digest;
  std::uint64_t snippet_count = 0;
  std::uint64_t total_term_occurrences = 0;
  double avgdl = 0.0;
  std::uint64_t max_words = kDefaultSnippetWords;
  Bm25Params bm25;
  std::uint64_t lexicon_size = 0;
  std::map<std::string, FileEntry> files;

  // Serialized with a trailing "checksum" over the rest of the document.
  nlohmann::ordered_json to_json() const;
  // Validates the checksum and format version.
  static Manifest from_json(const nlohmann::ordered_json& j);
};

// Caps the bytes a build may write; exceeding it raises DiskFullError.
// Shared by all shard writers of one build.
class WriteBudget {
 public:
  explicit WriteBudget(std::uint64_t bytes) : remaining_(bytes) {}

  void charge(std::uint64_t bytes, const std::filesystem::path& file);
  std::uint64_t remaining() const noexcept { return remaining_.load(); }

 private:
  std::atomic<std::uint64_t> remaining_;
};

// In-memory inverted index over a run of snippets, written out as one
// finalized segment on flush.
class InvertedBuffer {
 public:
  InvertedBuffer(std::shared_ptr<const Analyzer> analyzer, std::size_t max_words,
                 Bm25Params bm25 = {});

  void add(const Snippet& snippet, std::uint64_t source_position);

  std::size_t size() const noexcept { return lengths_.size(); }
  bool empty() const noexcept { return lengths_.empty(); }

  // Writes the buffered snippets as a segment in `dir` and clears the buffer.
  void flush(const std::filesystem::path& dir, WriteBudget* budget = nullptr);

 private:
  std::shared_ptr<const Analyzer> analyzer_;
  std::size_t max_words_;
  Bm25Params bm25_;
  std::vector<std::string> store_lines_;
  std::vector<std::uint32_t> lengths_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

// Read-only handle over a finalized segment directory. Immutable; share it
// freely between threads.
class Segment {
 public:
  static std::shared_ptr<const Segment> open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  const Manifest& manifest() const noexcept { return manifest_; }
  const Analyzer& analyzer() const noexcept { return *analyzer_; }
  std::shared_ptr<const Analyzer> analyzer_ptr() const noexcept { return analyzer_; }

  std::size_t snippet_count() const noexcept { return lengths_.size(); }
  double avgdl() const noexcept { return manifest_.avgdl; }

  // Sorted by term (bytewise); term_id = position.
  const std::vector<LexiconEntry>& lexicon() const noexcept { return lexicon_; }
  const LexiconEntry* find(std::string_view term) const;

  std::vector<Posting> postings(std::uint32_t term_id) const;
  std::uint32_t length(std::uint32_t ordinal) const { return lengths_.at(ordinal); }
  const std::vector<std::uint32_t>& lengths() const noexcept { return lengths_; }

  StoredSnippet snippet(std::uint32_t ordinal) const;
  // The raw store.jsonl line for an ordinal, without the newline.
  std::string_view store_line(std::uint32_t ordinal) const;

  // Recomputes every file checksum against the manifest.
  void verify() const;

 private:
  Segment() = default;

  std::filesystem::path dir_;
  Manifest manifest_;
  std::shared_ptr<const Analyzer> analyzer_;
  std::vector<LexiconEntry> lexicon_;
  std::vector<std::uint32_t> lengths_;
  MappedFile postings_file_;
  std::vector<std::pair<std::size_t, std::size_t>> blocks_;  // offset, bytes
  MappedFile store_file_;
  std::vector<std::size_t> line_starts_;  // size N + 1
};

std::shared_ptr<const Segment> open_segment(const std::filesystem::path& dir);

// Unknown terms report (0, 0).
TermStats term_stats(const Segment& segment, std::string_view term);
// The k entries with the highest df; ties broken by term ascending.
std::vector<LexiconEntry> top_terms(const Segment& segment, std::size_t k);

struct BuildOptions {
  std::size_t max_words = kDefaultSnippetWords;
  Bm25Params bm25;
  // Parallel shard writers; 0 selects the number of processors.
  std::size_t jobs = 1;
  WriteBudget* budget = nullptr;
  std::function<void(const std::string&)> on_warning;
};

struct BuildResult {
  std::vector<std::filesystem::path> segments;
  std::size_t documents = 0;
  std::size_t snippets = 0;
};

// Segments, analyzes and inverts every document, one finalized segment per
// non-empty shard. With one shard the segment is written to `out_dir`
// itself, otherwise to `out_dir/shard-NNNNN`. Each shard spills to disk
// whenever `plan.max_docs_in_ram` snippets are buffered and merges its
// spills at the end.
BuildResult build_offline(DocumentStream& documents, std::shared_ptr<const Analyzer> analyzer,
                          const ShardPlan& plan, const std::filesystem::path& out_dir,
                          const BuildOptions& options = {});
BuildResult build_offline(const CorpusSource& source, const AnalyzerConfig& analyzer,
                          const ShardPlan& plan, const std::filesystem::path& out_dir,
                          const BuildOptions& options = {}, ReadOptions read_options = {});

// Single pass over the stream; writes a sub-segment `out_dir/part-NNNNN`
// every `ram_budget_docs` buffered snippets (and one for the remainder).
BuildResult build_streaming(DocumentStream& documents, std::shared_ptr<const Analyzer> analyzer,
                            std::size_t ram_budget_docs, const std::filesystem::path& out_dir,
                            const BuildOptions& options = {});

// Combines segments built with the same analyzer, snippet limit and BM25
// parameters into one. Snippets are ordered by (source_position, seq), then
// by input order, so merging the shards or spills of one build reproduces
// the single-segment build exactly.
std::shared_ptr<const Segment> merge_segments(std::span<const std::shared_ptr<const Segment>> segments,
                                              const std::filesystem::path& out_dir,
                                              WriteBudget* budget = nullptr);

}  // namespace shardsearch
