#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "shardsearch/index.hpp"
#include "shardsearch/util/digest.hpp"

namespace shardsearch::detail {

struct SegmentData {
  std::vector<std::string> store_lines;  // by ordinal, no trailing newline
  std::vector<std::uint32_t> lengths;    // by ordinal
  std::vector<std::pair<std::string, std::vector<Posting>>> terms;  // sorted by term
};

// Writes a finalized segment. The manifest is written last, so a directory
// without one never opens.
void write_segment(const std::filesystem::path& dir, const Analyzer& analyzer,
                   std::size_t max_words, const Bm25Params& bm25, const SegmentData& data,
                   WriteBudget* budget);

// The output directory must be absent or empty; it is created.
void prepare_output_dir(const std::filesystem::path& dir);

std::string store_line(const StoredSnippet& snippet);

class FileSink {
 public:
  FileSink(std::filesystem::path path, WriteBudget* budget);

  void write(std::string_view bytes);
  FileEntry close();

 private:
  [[noreturn]] void fail();

  std::filesystem::path path_;
  WriteBudget* budget_;
  std::ofstream out_;
  Sha256 hash_;
  std::uint64_t bytes_ = 0;
};

}  // namespace shardsearch::detail
