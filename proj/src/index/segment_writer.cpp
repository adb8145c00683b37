#include "segment_writer.hpp"

#include <cerrno>
#include <cstring>
#include <numeric>

#include "shardsearch/util/varint.hpp"

namespace shardsearch {

void WriteBudget::charge(std::uint64_t bytes, const std::filesystem::path& file) {
  auto current = remaining_.load();
  do {
    if (bytes > current)
      throw DiskFullError("disk full: write budget exhausted while writing " + file.string());
  } while (!remaining_.compare_exchange_weak(current, current - bytes));
}

namespace detail {

FileSink::FileSink(std::filesystem::path path, WriteBudget* budget)
    : path_(std::move(path)), budget_(budget), out_(path_, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IndexError("cannot create " + path_.string() + ": " + std::strerror(errno));
}

void FileSink::fail() {
  if (errno == ENOSPC) throw DiskFullError("disk full while writing " + path_.string());
  throw IndexError("write failed for " + path_.string() + ": " + std::strerror(errno));
}

void FileSink::write(std::string_view bytes) {
  if (budget_ != nullptr) budget_->charge(bytes.size(), path_);
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out_) fail();
  hash_.update(bytes);
  bytes_ += bytes.size();
}

FileEntry FileSink::close() {
  out_.flush();
  if (!out_) fail();
  out_.close();
  if (out_.fail()) fail();
  return {bytes_, hash_.hex()};
}

std::string store_line(const StoredSnippet& s) {
  nlohmann::ordered_json j = {{"id", s.id},     {"doc_id", s.doc_id}, {"seq", s.seq},
                              {"pos", s.source_position}, {"text", s.text}, {"meta", s.meta}};
  return j.dump();
}

void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (std::filesystem::exists(dir, ec)) {
    if (!std::filesystem::is_directory(dir, ec))
      throw IndexError("output " + dir.string() + " exists and is not a directory");
    if (!std::filesystem::is_empty(dir, ec))
      throw IndexError("output directory " + dir.string() + " is not empty");
    return;
  }
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IndexError("cannot create " + dir.string() + ": " + ec.message());
}

void write_segment(const std::filesystem::path& dir, const Analyzer& analyzer,
                   std::size_t max_words, const Bm25Params& bm25, const SegmentData& data,
                   WriteBudget* budget) {
  const std::uint64_t n = data.lengths.size();
  if (n == 0) throw IndexError("nothing to index: a segment needs at least one snippet");
  if (data.store_lines.size() != n) throw IndexError("store and length tables disagree");

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IndexError("cannot create " + dir.string() + ": " + ec.message());
  if (std::filesystem::exists(dir / segment_files::manifest))
    throw IndexError("a segment already exists in " + dir.string());

  Manifest manifest;
  manifest.analyzer = analyzer.canonical();
  manifest.analyzer_digest = analyzer.digest();
  manifest.snippet_count = n;
  manifest.total_term_occurrences =
      std::accumulate(data.lengths.begin(), data.lengths.end(), std::uint64_t{0});
  manifest.avgdl = static_cast<double>(manifest.total_term_occurrences) / static_cast<double>(n);
  manifest.max_words = max_words;
  manifest.bm25 = bm25;
  manifest.lexicon_size = data.terms.size();

  {
    FileSink lexicon(dir / segment_files::lexicon, budget);
    FileSink postings(dir / segment_files::postings, budget);
    std::string line;
    std::string block;
    std::string header;
    for (std::size_t id = 0; id < data.terms.size(); ++id) {
      const auto& [term, list] = data.terms[id];
      if (term.empty() || term.find_first_of("\t\r\n") != std::string::npos)
        throw IndexError("term '" + term + "' cannot be stored in the lexicon");
      if (list.empty()) throw IndexError("term '" + term + "' has no postings");
      std::uint64_t cf = 0;
      block.clear();
      std::uint32_t prev = 0;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& p = list[i];
        if (p.ordinal >= n || p.tf == 0 || (i > 0 && p.ordinal <= prev))
          throw IndexError("postings for '" + term + "' are not strictly ascending");
        varint::put(block, i == 0 ? p.ordinal : p.ordinal - prev);
        varint::put(block, p.tf);
        prev = p.ordinal;
        cf += p.tf;
      }
      header.clear();
      varint::put(header, block.size());
      postings.write(header);
      postings.write(block);

      line.clear();
      line.append(term).append("\t").append(std::to_string(id)).append("\t");
      line.append(std::to_string(list.size())).append("\t").append(std::to_string(cf)).append("\n");
      lexicon.write(line);
    }
    manifest.files[std::string(segment_files::lexicon)] = lexicon.close();
    manifest.files[std::string(segment_files::postings)] = postings.close();
  }
  {
    FileSink lengths(dir / segment_files::lengths, budget);
    std::string buf;
    for (auto len : data.lengths) varint::put(buf, len);
    lengths.write(buf);
    manifest.files[std::string(segment_files::lengths)] = lengths.close();
  }
  {
    FileSink store(dir / segment_files::store, budget);
    for (const auto& line : data.store_lines) {
      store.write(line);
      store.write("\n");
    }
    manifest.files[std::string(segment_files::store)] = store.close();
  }

  analyzer.save_resources(dir);
  for (auto name : {kVocabFile, kMergesFile}) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    const auto bytes = std::filesystem::file_size(path);
    if (budget != nullptr) budget->charge(bytes, path);
    manifest.files[std::string(name)] = {bytes, sha256_file_hex(path)};
  }

  const auto tmp = dir / "manifest.json.tmp";
  {
    FileSink out(tmp, budget);
    out.write(manifest.to_json().dump(2));
    out.write("\n");
    out.close();
  }
  std::filesystem::rename(tmp, dir / segment_files::manifest, ec);
  if (ec) throw IndexError("cannot finalize " + dir.string() + ": " + ec.message());
}

}  // namespace detail
}  // namespace shardsearch
