#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shardsearch/corpus.hpp"

namespace shardsearch {

struct CaptionPair {
  std::string caption;
  std::string url;
};

// A unique normalized caption and every URL that carried it, in input order.
struct CaptionCluster {
  std::string caption;
  std::vector<std::string> urls;

  bool operator==(const CaptionCluster&) const = default;
};

// Collapses whitespace runs to one space and trims both ends; case is kept.
std::string normalize_caption(std::string_view caption);

class CaptionPairStream {
 public:
  virtual ~CaptionPairStream() = default;
  virtual std::optional<CaptionPair> next() = 0;
};

class VectorPairStream : public CaptionPairStream {
 public:
  explicit VectorPairStream(std::vector<CaptionPair> pairs) : pairs_(std::move(pairs)) {}

  std::optional<CaptionPair> next() override {
    if (pos_ >= pairs_.size()) return std::nullopt;
    return pairs_[pos_++];
  }

 private:
  std::vector<CaptionPair> pairs_;
  std::size_t pos_ = 0;
};

// Reads (caption, url) pairs from CSV, TSV, JSON or JSONL records.
class CaptionPairReader : public CaptionPairStream {
 public:
  CaptionPairReader(CorpusSource source, std::string caption_field = "caption",
                    std::string url_field = "url", ReadOptions options = {});

  std::optional<CaptionPair> next() override;

  std::size_t skipped() const noexcept { return records_.skipped(); }

 private:
  std::string caption_field_;
  std::string url_field_;
  RecordReader records_;
};

struct DedupOptions {
  // Pairs held in memory before a sorted run is spilled to disk.
  std::size_t max_pairs_in_ram = 1'000'000;
  // Where spill runs go; a fresh temporary directory when empty.
  std::filesystem::path spill_dir;
};

struct DedupStats {
  std::size_t pairs_read = 0;
  std::size_t pairs_accepted = 0;
  std::size_t empty_captions = 0;  // skipped because nothing was left after normalization
  std::size_t spill_runs = 0;
};

struct DedupResult {
  std::vector<CaptionCluster> clusters;  // in order of first appearance
  DedupStats stats;
};

DedupResult dedup_captions(CaptionPairStream& pairs, const DedupOptions& options = {});
DedupResult dedup_captions(std::span<const CaptionPair> pairs, const DedupOptions& options = {});

// One document per cluster: id "laion-<ordinal>", text = caption,
// meta["urls"] = the URL list as a JSON array.
class ClusterDocumentStream : public DocumentStream {
 public:
  explicit ClusterDocumentStream(std::span<const CaptionCluster> clusters) : clusters_(clusters) {}

  std::optional<RawDocument> next() override;

 private:
  std::span<const CaptionCluster> clusters_;
  std::size_t pos_ = 0;
};

RawDocument cluster_document(const CaptionCluster& cluster, std::size_t ordinal);

// {"caption": ..., "urls": [...]} per line.
void write_clusters_jsonl(std::ostream& out, std::span<const CaptionCluster> clusters);
std::vector<CaptionCluster> read_clusters_jsonl(std::istream& in);

}  // namespace shardsearch
