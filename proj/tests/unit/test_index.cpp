#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "bm25_oracle.hpp"
#include "shardsearch/index.hpp"
#include "shardsearch/searcher.hpp"
#include "shardsearch/util/digest.hpp"
#include "shardsearch/util/varint.hpp"
#include "test_support.hpp"

using namespace shardsearch;
using testing_support::cat_fixture;
using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

std::shared_ptr<const Analyzer> fixture_analyzer() {
  return make_analyzer(AnalyzerConfig::simple({"a"}, false));
}

std::shared_ptr<const Segment> build_one(const std::vector<RawDocument>& docs, const std::filesystem::path& dir,
                                         std::shared_ptr<const Analyzer> analyzer = fixture_analyzer(),
                                         std::size_t max_words = kDefaultSnippetWords) {
  VectorDocumentStream stream(docs);
  BuildOptions options;
  options.max_words = max_words;
  build_offline(stream, std::move(analyzer), ShardPlan{1, 100000}, dir, options);
  return Segment::open(dir);
}

std::map<std::string, TermStats> lexicon_map(const Segment& seg) {
  std::map<std::string, TermStats> out;
  for (const auto& e : seg.lexicon()) out[e.term] = {e.df, e.cf};
  return out;
}

std::vector<std::string> snippet_ids(const Segment& seg) {
  std::vector<std::string> ids;
  for (std::uint32_t i = 0; i < seg.snippet_count(); ++i) ids.push_back(seg.snippet(i).id);
  return ids;
}

// Counts pulls so tests can assert single-pass consumption.
class CountingStream : public DocumentStream {
 public:
  explicit CountingStream(std::vector<RawDocument> docs) : inner_(std::move(docs)) {}
  std::optional<RawDocument> next() override {
    ++pulls;
    if (exhausted) ++pulls_after_end;
    auto d = inner_.next();
    if (!d) exhausted = true;
    return d;
  }
  std::size_t pulls = 0;
  std::size_t pulls_after_end = 0;
  bool exhausted = false;

 private:
  VectorDocumentStream inner_;
};

}  // namespace

TEST_CASE("varint round trip and layout") {
  std::string buf;
  for (std::uint64_t v : {0ULL, 1ULL, 127ULL, 128ULL, 300ULL, 16384ULL, ~0ULL}) varint::put(buf, v);
  CHECK(static_cast<unsigned char>(buf[2]) == 0x7F);
  CHECK(static_cast<unsigned char>(buf[3]) == 0x80);
  CHECK(static_cast<unsigned char>(buf[4]) == 0x01);
  varint::Reader r({reinterpret_cast<const unsigned char*>(buf.data()), buf.size()});
  for (std::uint64_t v : {0ULL, 1ULL, 127ULL, 128ULL, 300ULL, 16384ULL, ~0ULL}) CHECK(r.next() == v);
  CHECK(r.done());
  CHECK_THROWS_AS(r.next(), IndexError);
}

TEST_CASE("fixture index statistics") {
  TempDir dir;
  auto seg = build_one(cat_fixture(), dir / "ix");
  CHECK(seg->snippet_count() == 3);
  CHECK(seg->avgdl() == doctest::Approx(7.0 / 3.0));
  CHECK(seg->manifest().total_term_occurrences == 7);
  CHECK(lexicon_map(*seg) == std::map<std::string, TermStats>{{"cat", {2, 4}}, {"dog", {1, 1}}, {"sat", {2, 2}}});
  CHECK(term_stats(*seg, "cat") == TermStats{2, 4});
  CHECK(term_stats(*seg, "zebra") == TermStats{0, 0});
  auto top = top_terms(*seg, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].term == "cat");
  CHECK(top_terms(*seg, 10).size() == 3);
  CHECK(top_terms(*seg, 10)[1].term == "sat");
  CHECK(seg->lengths() == std::vector<std::uint32_t>{2, 2, 3});
  CHECK(seg->postings(seg->find("cat")->term_id) == std::vector<Posting>{{0, 1}, {2, 3}});
  auto s = seg->snippet(2);
  CHECK(s.id == "d3#0");
  CHECK(s.doc_id == "d3");
  CHECK(s.text == "cat cat cat");
}

TEST_CASE("on-disk layout is bit exact") {
  TempDir dir;
  auto seg = build_one(cat_fixture(), dir / "ix");
  CHECK(read_file(dir / "ix/lexicon.tsv") == "cat\t0\t2\t4\ndog\t1\t1\t1\nsat\t2\t2\t2\n");
  // Per term: block length, then (delta, tf) pairs; first delta is the ordinal.
  const std::string expected_postings = std::string("\x04\x00\x01\x02\x03", 5) + std::string("\x02\x01\x01", 3) +
                                        std::string("\x04\x00\x01\x01\x01", 5);
  CHECK(read_file(dir / "ix/postings.bin") == expected_postings);
  CHECK(read_file(dir / "ix/lengths.bin") == std::string("\x02\x02\x03", 3));
  auto store = testing_support::read_lines(dir / "ix/store.jsonl");
  REQUIRE(store.size() == 3);
  auto line = nlohmann::json::parse(store[0]);
  CHECK(line["id"] == "d1#0");
  CHECK(line["text"] == "a cat sat");
  auto manifest = nlohmann::json::parse(read_file(dir / "ix/manifest.json"));
  CHECK(manifest["format_version"] == 1);
  CHECK(manifest["snippet_count"] == 3);
  CHECK(manifest["bm25"]["k1"] == 0.9);
  CHECK(manifest["bm25"]["b"] == 0.4);
  CHECK(manifest["analyzer_digest"] == fixture_analyzer()->digest());
  CHECK(manifest.contains("checksum"));
}

TEST_CASE("empty corpus is rejected") {
  TempDir dir;
  VectorDocumentStream none({});
  CHECK_THROWS_WITH_AS(build_offline(none, fixture_analyzer(), {}, dir / "ix"), doctest::Contains("nothing to index"),
                       IndexError);
  VectorDocumentStream blank({{"d1", "  ", {}}, {"d2", "", {}}});
  CHECK_THROWS_WITH_AS(build_offline(blank, fixture_analyzer(), {}, dir / "iy"), doctest::Contains("nothing to index"),
                       IndexError);
}

TEST_CASE("duplicate document ids are fatal") {
  TempDir dir;
  VectorDocumentStream docs({{"d1", "x", {}}, {"d2", "y", {}}, {"d1", "z", {}}});
  CHECK_THROWS_WITH_AS(build_offline(docs, fixture_analyzer(), {}, dir / "ix"), doctest::Contains("duplicate"),
                       IndexError);
  VectorDocumentStream again({{"d1", "x", {}}, {"d1", "z", {}}});
  CHECK_THROWS_AS(build_streaming(again, fixture_analyzer(), 10, dir / "iy"), IndexError);
}

TEST_CASE("output directory must be empty") {
  TempDir dir;
  write_file(dir / "ix/junk.txt", "x");
  VectorDocumentStream docs(cat_fixture());
  CHECK_THROWS_AS(build_offline(docs, fixture_analyzer(), {}, dir / "ix"), IndexError);
}

TEST_CASE("sharded build partitions the snippets") {
  TempDir dir;
  std::vector<RawDocument> docs;
  for (int i = 0; i < 6; ++i) docs.push_back({"d" + std::to_string(i), "word" + std::to_string(i) + " common", {}});
  VectorDocumentStream stream(docs);
  auto result = build_offline(stream, fixture_analyzer(), ShardPlan{2, 100}, dir / "ix");
  REQUIRE(result.segments.size() == 2);
  CHECK(result.documents == 6);
  auto a = Segment::open(result.segments[0]);
  auto b = Segment::open(result.segments[1]);
  CHECK(snippet_ids(*a) == std::vector<std::string>{"d0#0", "d2#0", "d4#0"});
  CHECK(snippet_ids(*b) == std::vector<std::string>{"d1#0", "d3#0", "d5#0"});
  CHECK(result.segments[0].filename() == "shard-00000");
}

TEST_CASE("empty shards are skipped with a warning") {
  TempDir dir;
  VectorDocumentStream stream({{"d0", "x", {}}, {"d1", "y", {}}});
  std::vector<std::string> warnings;
  BuildOptions options;
  options.on_warning = [&](const std::string& w) { warnings.push_back(w); };
  auto result = build_offline(stream, fixture_analyzer(), ShardPlan{3, 100}, dir / "ix", options);
  CHECK(result.segments.size() == 2);
  CHECK(warnings.size() == 1);
  CHECK_FALSE(std::filesystem::exists(dir / "ix/.spill"));
}

TEST_CASE("streaming spills every ram budget") {
  TempDir dir;
  std::vector<RawDocument> docs;
  for (int i = 0; i < 10; ++i) docs.push_back({"d" + std::to_string(i), "alpha beta", {}});
  CountingStream stream(docs);
  auto result = build_streaming(stream, fixture_analyzer(), 4, dir / "ix");
  REQUIRE(result.segments.size() == 3);
  std::vector<std::size_t> sizes;
  for (const auto& s : result.segments) sizes.push_back(Segment::open(s)->snippet_count());
  CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
  CHECK(stream.pulls == 11);
  CHECK(stream.pulls_after_end == 0);
}

TEST_CASE("offline build reads its input once") {
  TempDir dir;
  std::mt19937_64 rng(3);
  CountingStream stream(testing_support::random_corpus(rng, 50, 30, 0, 40));
  build_offline(stream, fixture_analyzer(), ShardPlan{3, 7}, dir / "ix");
  CHECK(stream.pulls == 51);
  CHECK(stream.pulls_after_end == 0);
}

TEST_CASE("build, shard-and-merge and stream-and-merge agree") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 5; ++round) {
    TempDir dir;
    auto docs = testing_support::random_corpus(rng, 120, 40, 0, 30);
    auto analyzer = fixture_analyzer();
    auto single = build_one(docs, dir / "single", analyzer, 8);

    VectorDocumentStream s1(docs);
    BuildOptions options;
    options.max_words = 8;
    options.jobs = static_cast<std::size_t>(1 + round % 3);
    auto sharded = build_offline(s1, analyzer, ShardPlan{4, 9}, dir / "sharded", options);
    std::vector<std::shared_ptr<const Segment>> parts;
    for (const auto& p : sharded.segments) parts.push_back(Segment::open(p));
    auto merged = merge_segments(parts, dir / "merged");

    VectorDocumentStream s2(docs);
    auto streamed = build_streaming(s2, analyzer, 13, dir / "streamed", options);
    CHECK(streamed.segments.size() >= 3);
    std::vector<std::shared_ptr<const Segment>> spills;
    for (const auto& p : streamed.segments) spills.push_back(Segment::open(p));
    auto restreamed = merge_segments(spills, dir / "restreamed");

    for (const auto* other : {merged.get(), restreamed.get()}) {
      CHECK(other->snippet_count() == single->snippet_count());
      CHECK(other->lexicon() == single->lexicon());
      CHECK(other->lengths() == single->lengths());
      CHECK(snippet_ids(*other) == snippet_ids(*single));
      CHECK(read_file(other->dir() / "postings.bin") == read_file(single->dir() / "postings.bin"));
      CHECK(read_file(other->dir() / "store.jsonl") == read_file(single->dir() / "store.jsonl"));
      for (int q = 0; q < 20; ++q) {
        const auto raw = "w" + std::to_string(rng() % 40) + " w" + std::to_string(rng() % 40);
        CHECK(score_bm25(*other, make_query(other->analyzer(), raw, 10)) ==
              score_bm25(*single, make_query(single->analyzer(), raw, 10)));
      }
    }
  }
}

TEST_CASE("parallel and sequential offline builds are identical") {
  std::mt19937_64 rng(9);
  auto docs = testing_support::random_corpus(rng, 200, 60, 1, 50);
  TempDir dir;
  std::vector<std::string> digests;
  for (std::size_t jobs : {1, 2, 4}) {
    VectorDocumentStream stream(docs);
    BuildOptions options;
    options.jobs = jobs;
    options.max_words = 16;
    const auto out = dir / ("j" + std::to_string(jobs));
    auto result = build_offline(stream, fixture_analyzer(), ShardPlan{4, 11}, out, options);
    std::string all;
    for (const auto& s : result.segments)
      for (const char* f : {"lexicon.tsv", "postings.bin", "lengths.bin", "store.jsonl"}) all += read_file(s / f);
    digests.push_back(all);
    CHECK_FALSE(std::filesystem::exists(out / ".spill"));
  }
  CHECK(digests[0] == digests[1]);
  CHECK(digests[0] == digests[2]);
}

TEST_CASE("merging one segment reproduces its statistics") {
  TempDir dir;
  auto seg = build_one(cat_fixture(), dir / "a");
  std::vector<std::shared_ptr<const Segment>> one{seg};
  auto merged = merge_segments(one, dir / "m");
  CHECK(merged->lexicon() == seg->lexicon());
  CHECK(merged->lengths() == seg->lengths());
  for (const char* f : {"lexicon.tsv", "postings.bin", "lengths.bin", "store.jsonl"})
    CHECK(read_file(dir / "m" / f) == read_file(dir / "a" / f));
}

TEST_CASE("merge preconditions") {
  TempDir dir;
  auto a = build_one(cat_fixture(), dir / "a");
  auto b = build_one({{"x1", "cat", {}}}, dir / "b", make_analyzer(AnalyzerConfig::simple()));
  std::vector<std::shared_ptr<const Segment>> mixed{a, b};
  CHECK_THROWS_WITH_AS(merge_segments(mixed, dir / "m1"), doctest::Contains("analyzer"), IndexError);
  auto c = build_one(cat_fixture(), dir / "c");
  std::vector<std::shared_ptr<const Segment>> overlapping{a, c};
  CHECK_THROWS_WITH_AS(merge_segments(overlapping, dir / "m2"), doctest::Contains("overlapping"), IndexError);
  auto d = build_one({{"x1", "cat", {}}}, dir / "d", fixture_analyzer(), 5);
  std::vector<std::shared_ptr<const Segment>> limits{a, d};
  CHECK_THROWS_AS(merge_segments(limits, dir / "m3"), IndexError);
  CHECK_THROWS_AS(merge_segments({}, dir / "m4"), IndexError);
}

TEST_CASE("open detects missing and corrupt files") {
  TempDir dir;
  build_one(cat_fixture(), dir / "ix");
  auto copy = [&](const std::string& name) {
    std::filesystem::copy(dir / "ix", dir / name, std::filesystem::copy_options::recursive);
    return dir / name;
  };

  auto missing = copy("missing");
  std::filesystem::remove(missing / "lexicon.tsv");
  CHECK_THROWS_WITH_AS(Segment::open(missing), doctest::Contains("lexicon.tsv"), IndexError);

  auto manifest = copy("manifest");
  auto text = read_file(manifest / "manifest.json");
  text.replace(text.find("\"snippet_count\": 3"), 18, "\"snippet_count\": 4");
  write_file(manifest / "manifest.json", text);
  CHECK_THROWS_WITH_AS(Segment::open(manifest), doctest::Contains("checksum"), IndexError);

  auto truncated = copy("truncated");
  write_file(truncated / "postings.bin", "\x04\x00");
  CHECK_THROWS_AS(Segment::open(truncated), IndexError);

  auto flipped = copy("flipped");
  auto store = read_file(flipped / "store.jsonl");
  store[store.find("dog")] = 'h';
  write_file(flipped / "store.jsonl", store);
  auto seg = Segment::open(flipped);  // same size; caught by verify
  CHECK_THROWS_WITH_AS(seg->verify(), doctest::Contains("store.jsonl"), IndexError);
  CHECK_NOTHROW(Segment::open(dir / "ix")->verify());

  CHECK_THROWS_AS(Segment::open(dir / "nowhere"), IndexError);
}

TEST_CASE("format version is checked") {
  TempDir dir;
  build_one(cat_fixture(), dir / "ix");
  auto j = nlohmann::ordered_json::parse(read_file(dir / "ix/manifest.json"));
  j.erase("checksum");
  j["format_version"] = 2;
  j["checksum"] = sha256_hex(j.dump());
  write_file(dir / "ix/manifest.json", j.dump(2));
  CHECK_THROWS_WITH_AS(Segment::open(dir / "ix"), doctest::Contains("format_version"), IndexError);
}

TEST_CASE("manifest round trip") {
  TempDir dir;
  auto seg = build_one(cat_fixture(), dir / "ix");
  auto back = Manifest::from_json(seg->manifest().to_json());
  CHECK(back.snippet_count == seg->manifest().snippet_count);
  CHECK(back.files == seg->manifest().files);
  CHECK(back.analyzer == seg->manifest().analyzer);
}

TEST_CASE("segments are position independent") {
  TempDir dir;
  std::mt19937_64 rng(13);
  auto docs = testing_support::random_corpus(rng, 80, 25, 1, 20);
  auto seg = build_one(docs, dir / "ix");
  std::filesystem::create_directories(dir / "elsewhere/deeper");
  std::filesystem::copy(dir / "ix", dir / "elsewhere/deeper", std::filesystem::copy_options::recursive);
  auto moved = Segment::open(dir / "elsewhere/deeper");
  moved->verify();
  for (int q = 0; q < 20; ++q) {
    const auto raw = "w" + std::to_string(rng() % 25);
    CHECK(score_bm25(*moved, make_query(moved->analyzer(), raw, 5)) ==
          score_bm25(*seg, make_query(seg->analyzer(), raw, 5)));
  }
}

TEST_CASE("subword segments carry their model files") {
  TempDir dir;
  auto analyzer = make_analyzer(AnalyzerConfig::subword(testing_support::fixture("subword_vocab.txt"),
                                                        testing_support::fixture("subword_merges.txt")));
  auto seg = build_one({{"d1", "low lowlow owl", {}}, {"d2", "slow", {}}}, dir / "ix", analyzer);
  CHECK(std::filesystem::exists(dir / "ix/vocab.txt"));
  CHECK(term_stats(*seg, "low") == TermStats{2, 4});
  std::filesystem::rename(dir / "ix", dir / "moved");
  auto reopened = Segment::open(dir / "moved");
  CHECK(reopened->analyzer().digest() == analyzer->digest());
}

TEST_CASE("eight concurrent readers agree") {
  TempDir dir;
  std::mt19937_64 rng(17);
  auto seg = build_one(testing_support::random_corpus(rng, 300, 50, 1, 30), dir / "ix");
  std::vector<std::string> queries;
  for (int i = 0; i < 50; ++i) queries.push_back("w" + std::to_string(rng() % 50) + " w" + std::to_string(rng() % 50));
  std::vector<std::vector<ScoredHit>> expected;
  for (const auto& q : queries) expected.push_back(score_bm25(*seg, make_query(seg->analyzer(), q, 10)));
  std::vector<int> mismatches(8, 0);
  std::vector<std::thread> readers;
  for (int t = 0; t < 8; ++t)
    readers.emplace_back([&, t] {
      for (int round = 0; round < 5; ++round)
        for (std::size_t i = 0; i < queries.size(); ++i) {
          auto hits = score_bm25(*seg, make_query(seg->analyzer(), queries[i], 10));
          for (const auto& h : hits) (void)seg->snippet(h.ordinal);
          if (hits != expected[i]) ++mismatches[static_cast<std::size_t>(t)];
        }
    });
  for (auto& r : readers) r.join();
  CHECK(mismatches == std::vector<int>(8, 0));
}

TEST_CASE("write budget simulates a full disk") {
  std::mt19937_64 rng(19);
  auto docs = testing_support::random_corpus(rng, 100, 30, 5, 30);
  TempDir dir;
  {
    WriteBudget tiny(500);
    VectorDocumentStream stream(docs);
    BuildOptions options;
    options.budget = &tiny;
    CHECK_THROWS_AS(build_streaming(stream, fixture_analyzer(), 10, dir / "small", options), DiskFullError);
  }
  {
    // Staging spills count against the same budget as the final segment.
    WriteBudget roomy(10'000'000);
    VectorDocumentStream stream(docs);
    BuildOptions options;
    options.budget = &roomy;
    auto result = build_offline(stream, fixture_analyzer(), ShardPlan{1, 10}, dir / "big", options);
    CHECK(result.segments.size() == 1);
    CHECK(roomy.remaining() < 10'000'000);
  }
}
