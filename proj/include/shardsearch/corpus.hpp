#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shardsearch/error.hpp"

namespace shardsearch {

using Meta = std::map<std::string, std::string>;

// One corpus record as read from disk or a stream.
struct RawDocument {
  std::string id;
  std::string text;
  Meta meta;

  bool operator==(const RawDocument&) const = default;
};

// Single-consumer pull interface over documents. Implementations never
// materialize the whole corpus.
class DocumentStream {
 public:
  virtual ~DocumentStream() = default;
  virtual std::optional<RawDocument> next() = 0;
};

enum class SourceKind { file, directory, stream };
enum class SourceFormat { jsonl, json, csv, tsv };

SourceFormat parse_format(std::string_view name);
std::string_view to_string(SourceFormat format);
std::optional<SourceFormat> format_from_extension(const std::filesystem::path& path);

// Names of the columns (CSV/TSV) or keys (JSON/JSONL) holding each field.
struct FieldMap {
  std::string id = "id";
  std::string text = "contents";
  std::string meta = "meta";
};

struct CorpusSource {
  SourceKind kind = SourceKind::file;
  SourceFormat format = SourceFormat::jsonl;
  std::filesystem::path path;
  std::istream* stream = nullptr;  // borrowed; used when kind == stream
  FieldMap fields;

  // "-" selects standard input; directories are read file by file in name
  // order. The format is inferred from the extension unless given.
  static CorpusSource from_path(const std::filesystem::path& path,
                                std::optional<SourceFormat> format = std::nullopt);
  static CorpusSource from_stream(std::istream& in, SourceFormat format);
};

struct ReadOptions {
  // Abort on the first malformed record instead of skipping it.
  bool strict = false;
  // Called for every skipped record in non-strict mode.
  std::function<void(const CorpusError&)> on_skip;
};

// Generic record reader: yields one JSON object per record regardless of the
// on-disk format. CSV/TSV rows become objects keyed by the header row.
class RecordReader {
 public:
  RecordReader(CorpusSource source, ReadOptions options = {});
  ~RecordReader();
  RecordReader(RecordReader&&) noexcept;
  RecordReader& operator=(RecordReader&&) noexcept;

  std::optional<nlohmann::json> next();

  // Records seen so far, including skipped ones.
  std::size_t records_seen() const noexcept { return ordinal_; }
  std::size_t skipped() const noexcept { return skipped_; }

  // Reports a record that decoded but failed a downstream check (for example
  // a missing field), honoring the strict/skip policy.
  void reject(std::size_t ordinal, const std::string& why);

  class Parser;  // defined in the implementation

 private:

  bool open_next_input();

  CorpusSource source_;
  ReadOptions options_;
  std::vector<std::filesystem::path> files_;
  std::size_t next_file_ = 0;
  std::unique_ptr<std::istream> owned_;
  std::unique_ptr<Parser> parser_;
  std::string current_name_;
  std::size_t ordinal_ = 0;
  std::size_t skipped_ = 0;
};

class DocumentReader : public DocumentStream {
 public:
  DocumentReader(CorpusSource source, ReadOptions options = {});

  std::optional<RawDocument> next() override;

  std::size_t skipped() const noexcept { return records_.skipped(); }
  std::size_t records_seen() const noexcept { return records_.records_seen(); }

 private:
  FieldMap fields_;
  RecordReader records_;
};

std::unique_ptr<DocumentReader> open_source(const CorpusSource& source, ReadOptions options = {});

// Converts a decoded record to a document. Keys other than id/text/meta are
// folded into meta; non-string values are kept as compact JSON text.
RawDocument to_document(const nlohmann::json& record, const FieldMap& fields);

void write_jsonl(std::ostream& out, const RawDocument& doc);

struct ShardPlan {
  std::size_t shard_count = 1;
  std::size_t max_docs_in_ram = 100'000;

  void validate() const;
};

inline std::size_t shard_of(std::size_t ordinal, std::size_t shard_count) noexcept {
  return ordinal % shard_count;
}

struct ShardAssignment {
  std::size_t shard = 0;
  std::size_t ordinal = 0;
  RawDocument document;
};

// Tags each document with shard = ordinal mod shard_count.
class ShardAssigner {
 public:
  ShardAssigner(DocumentStream& documents, ShardPlan plan);

  std::optional<ShardAssignment> next();

 private:
  DocumentStream& documents_;
  ShardPlan plan_;
  std::size_t ordinal_ = 0;
};

// In-memory stream, mostly for tests and for adapters.
class VectorDocumentStream : public DocumentStream {
 public:
  explicit VectorDocumentStream(std::vector<RawDocument> docs) : docs_(std::move(docs)) {}

  std::optional<RawDocument> next() override {
    if (pos_ >= docs_.size()) return std::nullopt;
    return docs_[pos_++];
  }

 private:
  std::vector<RawDocument> docs_;
  std::size_t pos_ = 0;
};

}  // namespace shardsearch
