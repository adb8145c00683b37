#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "shardsearch/index.hpp"
#include "shardsearch/util/digest.hpp"
#include "shardsearch/util/varint.hpp"

namespace shardsearch {
namespace {

using nlohmann::ordered_json;

template <typename T>
bool parse_uint(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ordered_json Manifest::to_json() const {
  ordered_json j;
  j["format_version"] = format_version;
  j["analyzer"] = ordered_json::parse(analyzer.dump());
  j["analyzer_digest"] = analyzer_digest;
  j["snippet_count"] = snippet_count;
  j["total_term_occurrences"] = total_term_occurrences;
  j["avgdl"] = avgdl;
  j["max_words"] = max_words;
  j["bm25"] = {{"k1", bm25.k1}, {"b", bm25.b}};
  j["lexicon_size"] = lexicon_size;
  j["files"] = ordered_json::object();
  for (const auto& [name, entry] : files)
    j["files"][name] = {{"bytes", entry.bytes}, {"sha256", entry.sha256}};
  j["checksum"] = sha256_hex(j.dump());
  return j;
}

Manifest Manifest::from_json(const ordered_json& source) {
  ordered_json j = source;
  if (!j.is_object() || !j.contains("checksum") || !j["checksum"].is_string())
    throw IndexError("manifest has no checksum");
  const auto checksum = j["checksum"].get<std::string>();
  j.erase("checksum");
  if (sha256_hex(j.dump()) != checksum) throw IndexError("manifest checksum mismatch");

  Manifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kFormatVersion)
      throw IndexError("unsupported segment format_version " + std::to_string(m.format_version) +
                       " (expected " + std::to_string(kFormatVersion) + ")");
    m.analyzer = nlohmann::json::parse(j.at("analyzer").dump());
    m.analyzer_digest = j.at("analyzer_digest").get<std::string>();
    m.snippet_count = j.at("snippet_count").get<std::uint64_t>();
    m.total_term_occurrences = j.at("total_term_occurrences").get<std::uint64_t>();
    m.avgdl = j.at("avgdl").get<double>();
    m.max_words = j.at("max_words").get<std::uint64_t>();
    m.bm25.k1 = j.at("bm25").at("k1").get<double>();
    m.bm25.b = j.at("bm25").at("b").get<double>();
    m.lexicon_size = j.at("lexicon_size").get<std::uint64_t>();
    for (const auto& [name, entry] : j.at("files").items())
      m.files[name] = {entry.at("bytes").get<std::uint64_t>(), entry.at("sha256").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw IndexError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::shared_ptr<const Segment> Segment::open(const std::filesystem::path& dir) {
  auto seg = std::shared_ptr<Segment>(new Segment());
  seg->dir_ = dir;
  const auto where = [&](std::string_view name) { return (dir / name).string(); };

  const auto manifest_path = dir / segment_files::manifest;
  if (!std::filesystem::is_regular_file(manifest_path))
    throw IndexError("not a segment: missing " + where(segment_files::manifest));
  ordered_json mj;
  try {
    mj = ordered_json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IndexError("corrupt " + where(segment_files::manifest) + ": " + e.what());
  }
  seg->manifest_ = Manifest::from_json(mj);
  const auto& m = seg->manifest_;

  for (auto name : {segment_files::lexicon, segment_files::postings, segment_files::lengths,
                    segment_files::store}) {
    if (!m.files.contains(std::string(name)))
      throw IndexError("manifest does not list " + std::string(name));
  }
  for (const auto& [name, entry] : m.files) {
    const auto path = dir / name;
    if (!std::filesystem::is_regular_file(path)) throw IndexError("missing segment file " + path.string());
    if (std::filesystem::file_size(path) != entry.bytes)
      throw IndexError("corrupt segment file " + path.string() + ": size differs from manifest");
  }
  if (m.snippet_count == 0) throw IndexError("segment " + dir.string() + " holds no snippets");
  if (m.avgdl != static_cast<double>(m.total_term_occurrences) / static_cast<double>(m.snippet_count))
    throw IndexError("manifest avgdl is inconsistent with its counts");

  try {
    seg->analyzer_ = analyzer_from_canonical(m.analyzer, dir, m.analyzer_digest);
  } catch (const AnalyzerError& e) {
    throw IndexError("cannot rebuild analyzer for " + dir.string() + ": " + e.what());
  }

  // lexicon.tsv: term, term_id, df, cf
  {
    const auto text = read_text(dir / segment_files::lexicon);
    std::string_view rest(text);
    seg->lexicon_.reserve(m.lexicon_size);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      if (nl == std::string_view::npos) throw IndexError("corrupt " + where(segment_files::lexicon) + ": unterminated line");
      auto line = rest.substr(0, nl);
      rest.remove_prefix(nl + 1);
      std::string_view cols[4];
      for (int c = 0; c < 3; ++c) {
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw IndexError("corrupt " + where(segment_files::lexicon) + ": short line");
        cols[c] = line.substr(0, tab);
        line.remove_prefix(tab + 1);
      }
      cols[3] = line;
      LexiconEntry e;
      e.term = std::string(cols[0]);
      if (!parse_uint(cols[1], e.term_id) || !parse_uint(cols[2], e.df) || !parse_uint(cols[3], e.cf))
        throw IndexError("corrupt " + where(segment_files::lexicon) + ": bad number");
      if (e.term_id != seg->lexicon_.size() || e.df == 0 || e.cf < e.df ||
          (!seg->lexicon_.empty() && seg->lexicon_.back().term >= e.term))
        throw IndexError("corrupt " + where(segment_files::lexicon) + " at term '" + e.term + "'");
      seg->lexicon_.push_back(std::move(e));
    }
    if (seg->lexicon_.size() != m.lexicon_size)
      throw IndexError("corrupt " + where(segment_files::lexicon) + ": term count differs from manifest");
  }

  // postings.bin: per term, varint block length followed by the block.
  {
    seg->postings_file_ = MappedFile(dir / segment_files::postings);
    varint::Reader reader(seg->postings_file_.bytes());
    seg->blocks_.reserve(seg->lexicon_.size());
    for (std::size_t t = 0; t < seg->lexicon_.size(); ++t) {
      const auto len = reader.next();
      const auto offset = reader.position();
      reader.skip(len);
      seg->blocks_.emplace_back(offset, len);
    }
    if (!reader.done()) throw IndexError("corrupt " + where(segment_files::postings) + ": trailing bytes");
  }

  // lengths.bin
  {
    const MappedFile lengths(dir / segment_files::lengths);
    varint::Reader reader(lengths.bytes());
    seg->lengths_.reserve(m.snippet_count);
    std::uint64_t total = 0;
    while (!reader.done()) {
      const auto len = reader.next();
      seg->lengths_.push_back(static_cast<std::uint32_t>(len));
      total += len;
    }
    if (seg->lengths_.size() != m.snippet_count || total != m.total_term_occurrences)
      throw IndexError("corrupt " + where(segment_files::lengths) + ": totals differ from manifest");
  }

  // store.jsonl: line offsets only; lines are decoded on demand.
  {
    seg->store_file_ = MappedFile(dir / segment_files::store);
    const auto view = seg->store_file_.view();
    seg->line_starts_.reserve(m.snippet_count + 1);
    seg->line_starts_.push_back(0);
    std::size_t pos = 0;
    while (pos < view.size()) {
      const void* nl = std::memchr(view.data() + pos, '\n', view.size() - pos);
      if (nl == nullptr) throw IndexError("corrupt " + where(segment_files::store) + ": unterminated line");
      pos = static_cast<std::size_t>(static_cast<const char*>(nl) - view.data()) + 1;
      seg->line_starts_.push_back(pos);
    }
    if (seg->line_starts_.size() != m.snippet_count + 1)
      throw IndexError("corrupt " + where(segment_files::store) + ": line count differs from manifest");
  }
  return seg;
}

const LexiconEntry* Segment::find(std::string_view term) const {
  auto it = std::lower_bound(lexicon_.begin(), lexicon_.end(), term,
                             [](const LexiconEntry& e, std::string_view t) { return e.term < t; });
  if (it == lexicon_.end() || it->term != term) return nullptr;
  return &*it;
}

std::vector<Posting> Segment::postings(std::uint32_t term_id) const {
  const auto& entry = lexicon_.at(term_id);
  const auto [offset, len] = blocks_[term_id];
  varint::Reader reader(postings_file_.bytes().subspan(offset, len));
  std::vector<Posting> out;
  out.reserve(entry.df);
  std::uint64_t ordinal = 0;
  std::uint64_t cf = 0;
  for (std::uint64_t i = 0; i < entry.df; ++i) {
    const auto delta = reader.next();
    const auto tf = reader.next();
    if (i > 0 && delta == 0) throw IndexError("corrupt postings for '" + entry.term + "'");
    ordinal = i == 0 ? delta : ordinal + delta;
    if (ordinal >= lengths_.size() || tf == 0)
      throw IndexError("corrupt postings for '" + entry.term + "'");
    out.push_back({static_cast<std::uint32_t>(ordinal), static_cast<std::uint32_t>(tf)});
    cf += tf;
  }
  if (!reader.done() || cf != entry.cf) throw IndexError("corrupt postings for '" + entry.term + "'");
  return out;
}

std::string_view Segment::store_line(std::uint32_t ordinal) const {
  if (ordinal >= lengths_.size()) throw IndexError("snippet ordinal out of range");
  const auto start = line_starts_[ordinal];
  const auto end = line_starts_[ordinal + 1] - 1;
  return store_file_.view().substr(start, end - start);
}

StoredSnippet Segment::snippet(std::uint32_t ordinal) const {
  try {
    const auto j = nlohmann::json::parse(store_line(ordinal));
    StoredSnippet s;
    s.id = j.at("id").get<std::string>();
    s.doc_id = j.at("doc_id").get<std::string>();
    s.seq = j.at("seq").get<std::uint64_t>();
    s.source_position = j.at("pos").get<std::uint64_t>();
    s.text = j.at("text").get<std::string>();
    s.meta = j.at("meta").get<Meta>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IndexError("corrupt store line " + std::to_string(ordinal) + " in " + dir_.string() + ": " + e.what());
  }
}

void Segment::verify() const {
  for (const auto& [name, entry] : manifest_.files) {
    if (sha256_file_hex(dir_ / name) != entry.sha256)
      throw IndexError("checksum mismatch for " + (dir_ / name).string());
  }
}

std::shared_ptr<const Segment> open_segment(const std::filesystem::path& dir) {
  return Segment::open(dir);
}

TermStats term_stats(const Segment& segment, std::string_view term) {
  const auto* e = segment.find(term);
  if (e == nullptr) return {};
  return {e->df, e->cf};
}

std::vector<LexiconEntry> top_terms(const Segment& segment, std::size_t k) {
  const auto& lex = segment.lexicon();
  std::vector<const LexiconEntry*> ptrs;
  ptrs.reserve(lex.size());
  for (const auto& e : lex) ptrs.push_back(&e);
  k = std::min(k, ptrs.size());
  std::partial_sort(ptrs.begin(), ptrs.begin() + static_cast<std::ptrdiff_t>(k), ptrs.end(),
                    [](const LexiconEntry* a, const LexiconEntry* b) {
                      if (a->df != b->df) return a->df > b->df;
                      return a->term < b->term;
                    });
  std::vector<LexiconEntry> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(*ptrs[i]);
  return out;
}

}  // namespace shardsearch
