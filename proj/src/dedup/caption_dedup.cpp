#include <algorithm>
#include <fstream>
#include <queue>
#include <random>
#include <unordered_map>

#include "shardsearch/caption_dedup.hpp"
#include "shardsearch/util/utf8.hpp"

namespace shardsearch {
namespace {

struct Record {
  std::string caption;
  std::uint64_t ordinal = 0;
  std::string url;
};

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>(v >> (8 * i));
  out.write(buf, 8);
}

bool get_u64(std::istream& in, std::uint64_t& v) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return true;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  std::uint64_t n = 0;
  if (!get_u64(in, n)) throw Error("truncated dedup spill run");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw Error("truncated dedup spill run");
  return s;
}

class RunReader {
 public:
  explicit RunReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open dedup spill run " + path.string());
    advance();
  }

  bool done() const noexcept { return done_; }
  const Record& current() const noexcept { return current_; }
  Record take() {
    Record r = std::move(current_);
    advance();
    return r;
  }

 private:
  void advance() {
    std::uint64_t ordinal = 0;
    if (in_.peek() == std::char_traits<char>::eof()) {
      done_ = true;
      return;
    }
    current_.caption = get_string(in_);
    if (!get_u64(in_, ordinal)) throw Error("truncated dedup spill run");
    current_.ordinal = ordinal;
    current_.url = get_string(in_);
  }

  std::ifstream in_;
  Record current_;
  bool done_ = false;
};

std::filesystem::path fresh_temp_dir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto dir = std::filesystem::temp_directory_path() / ("caption-dedup-" + std::to_string(rd()));
    if (std::filesystem::create_directory(dir)) return dir;
  }
  throw Error("cannot create a temporary directory for dedup spills");
}

// Sorted-run spill and k-way merge for inputs above the pair budget.
class Spiller {
 public:
  explicit Spiller(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) {
      dir_ = fresh_temp_dir();
      owned_ = true;
    } else {
      std::filesystem::create_directories(dir_);
    }
  }

  ~Spiller() {
    std::error_code ec;
    for (const auto& run : runs_) std::filesystem::remove(run, ec);
    if (owned_) std::filesystem::remove_all(dir_, ec);
  }

  void spill(std::vector<Record>& records) {
    std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
      return a.caption != b.caption ? a.caption < b.caption : a.ordinal < b.ordinal;
    });
    auto path = dir_ / ("run-" + std::to_string(runs_.size()));
    std::ofstream out(path, std::ios::binary);
    for (const auto& r : records) {
      put_string(out, r.caption);
      put_u64(out, r.ordinal);
      put_string(out, r.url);
    }
    out.close();
    if (!out) throw Error("cannot write dedup spill run " + path.string());
    runs_.push_back(std::move(path));
    records.clear();
  }

  std::size_t runs() const noexcept { return runs_.size(); }

  // Groups by caption across all runs; clusters come out in caption order and
  // are then re-sorted by first appearance.
  std::vector<CaptionCluster> merge() {
    std::vector<std::unique_ptr<RunReader>> readers;
    for (const auto& run : runs_) readers.push_back(std::make_unique<RunReader>(run));
    auto greater = [&](std::size_t a, std::size_t b) {
      const auto& x = readers[a]->current();
      const auto& y = readers[b]->current();
      return x.caption != y.caption ? x.caption > y.caption : x.ordinal > y.ordinal;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
    for (std::size_t i = 0; i < readers.size(); ++i)
      if (!readers[i]->done()) heap.push(i);

    std::vector<std::pair<std::uint64_t, CaptionCluster>> grouped;
    while (!heap.empty()) {
      const auto i = heap.top();
      heap.pop();
      auto r = readers[i]->take();
      if (!readers[i]->done()) heap.push(i);
      if (grouped.empty() || grouped.back().second.caption != r.caption)
        grouped.push_back({r.ordinal, CaptionCluster{std::move(r.caption), {}}});
      grouped.back().second.urls.push_back(std::move(r.url));
    }
    std::sort(grouped.begin(), grouped.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<CaptionCluster> clusters;
    clusters.reserve(grouped.size());
    for (auto& [first, cluster] : grouped) clusters.push_back(std::move(cluster));
    return clusters;
  }

 private:
  std::filesystem::path dir_;
  bool owned_ = false;
  std::vector<std::filesystem::path> runs_;
};

std::vector<CaptionCluster> group_in_memory(std::vector<Record>& records) {
  std::vector<CaptionCluster> clusters;
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(records.size());
  for (auto& r : records) {
    auto it = index.find(r.caption);
    if (it == index.end()) {
      clusters.push_back(CaptionCluster{r.caption, {}});
      it = index.emplace(r.caption, clusters.size() - 1).first;  // view into the record, which outlives the map
    }
    clusters[it->second].urls.push_back(std::move(r.url));
  }
  return clusters;
}

std::string field_string(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_null()) return {};
  return value.dump();
}

}  // namespace

std::string normalize_caption(std::string_view caption) {
  std::string out;
  out.reserve(caption.size());
  for (auto word : utf8::split_whitespace(caption)) {
    if (!out.empty()) out.push_back(' ');
    out.append(word);
  }
  return out;
}

CaptionPairReader::CaptionPairReader(CorpusSource source, std::string caption_field,
                                     std::string url_field, ReadOptions options)
    : caption_field_(std::move(caption_field)),
      url_field_(std::move(url_field)),
      records_(std::move(source), std::move(options)) {}

std::optional<CaptionPair> CaptionPairReader::next() {
  while (auto record = records_.next()) {
    const auto ordinal = records_.records_seen() - 1;
    if (!record->is_object()) {
      records_.reject(ordinal, "record is not an object");
      continue;
    }
    auto caption = record->find(caption_field_);
    auto url = record->find(url_field_);
    if (caption == record->end() || url == record->end()) {
      records_.reject(ordinal, "missing field '" + (caption == record->end() ? caption_field_ : url_field_) + "'");
      continue;
    }
    return CaptionPair{field_string(*caption), field_string(*url)};
  }
  return std::nullopt;
}

DedupResult dedup_captions(CaptionPairStream& pairs, const DedupOptions& options) {
  if (options.max_pairs_in_ram < 1) throw ConfigError("max_pairs_in_ram must be at least 1");
  DedupResult result;
  std::vector<Record> buffer;
  std::optional<Spiller> spiller;
  while (auto pair = pairs.next()) {
    ++result.stats.pairs_read;
    auto caption = normalize_caption(pair->caption);
    if (caption.empty()) {
      ++result.stats.empty_captions;
      continue;
    }
    buffer.push_back(Record{std::move(caption), result.stats.pairs_accepted++, std::move(pair->url)});
    if (buffer.size() >= options.max_pairs_in_ram) {
      if (!spiller) spiller.emplace(options.spill_dir);
      spiller->spill(buffer);
    }
  }
  if (!spiller) {
    result.clusters = group_in_memory(buffer);
    return result;
  }
  if (!buffer.empty()) spiller->spill(buffer);
  result.stats.spill_runs = spiller->runs();
  result.clusters = spiller->merge();
  return result;
}

DedupResult dedup_captions(std::span<const CaptionPair> pairs, const DedupOptions& options) {
  VectorPairStream stream({pairs.begin(), pairs.end()});
  return dedup_captions(stream, options);
}

RawDocument cluster_document(const CaptionCluster& cluster, std::size_t ordinal) {
  RawDocument doc;
  doc.id = "laion-" + std::to_string(ordinal);
  doc.text = cluster.caption;
  doc.meta["urls"] = nlohmann::json(cluster.urls).dump();
  return doc;
}

std::optional<RawDocument> ClusterDocumentStream::next() {
  if (pos_ >= clusters_.size()) return std::nullopt;
  const auto ordinal = pos_++;
  return cluster_document(clusters_[ordinal], ordinal);
}

void write_clusters_jsonl(std::ostream& out, std::span<const CaptionCluster> clusters) {
  for (const auto& c : clusters) {
    nlohmann::ordered_json line;
    line["caption"] = c.caption;
    line["urls"] = c.urls;
    out << line.dump() << '\n';
  }
}

std::vector<CaptionCluster> read_clusters_jsonl(std::istream& in) {
  std::vector<CaptionCluster> clusters;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    clusters.push_back({j.at("caption").get<std::string>(), j.at("urls").get<std::vector<std::string>>()});
  }
  return clusters;
}

}  // namespace shardsearch
