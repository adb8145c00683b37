#include <doctest.h>

#include <sstream>

#include "shardsearch/corpus.hpp"
#include "test_support.hpp"

using namespace shardsearch;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

std::vector<RawDocument> drain(DocumentStream& stream) {
  std::vector<RawDocument> out;
  while (auto d = stream.next()) out.push_back(std::move(*d));
  return out;
}

std::vector<RawDocument> read_text(const std::string& text, SourceFormat format, ReadOptions options = {}) {
  std::istringstream in(text);
  DocumentReader reader(CorpusSource::from_stream(in, format), std::move(options));
  return drain(reader);
}

}  // namespace

TEST_CASE("jsonl lines become documents in order") {
  auto docs = read_text(
      "{\"id\":\"d1\",\"contents\":\"a\"}\n{\"id\":\"d2\",\"contents\":\"b\"}\n\n{\"id\":\"d3\",\"contents\":\"c\"}\n",
      SourceFormat::jsonl);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0] == RawDocument{"d1", "a", {}});
  CHECK(docs[1].id == "d2");
  CHECK(docs[2].text == "c");
}

TEST_CASE("empty inputs yield nothing") {
  for (auto format : {SourceFormat::jsonl, SourceFormat::csv, SourceFormat::tsv})
    CHECK(read_text("", format).empty());
  CHECK(read_text("[]", SourceFormat::json).empty());
  CHECK(read_text("  [ ]\n", SourceFormat::json).empty());
}

TEST_CASE("tsv rows match a line-splitting oracle") {
  const std::string text = "id\tcontents\tlang\nd1\tthe cat sat\ten\nd2\tun chat\tfr\n";
  auto docs = read_text(text, SourceFormat::tsv);

  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);  // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(lines, line)) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (auto tab = line.find('\t'); tab != std::string::npos; tab = line.find('\t', start)) {
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    cols.push_back(line.substr(start));
    rows.push_back(cols);
  }
  REQUIRE(docs.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(docs[i].id == rows[i][0]);
    CHECK(docs[i].text == rows[i][1]);
    CHECK(docs[i].meta.at("lang") == rows[i][2]);
  }
}

TEST_CASE("csv honours quoting") {
  auto docs = read_text("id,contents\n1,\"hello, \"\"world\"\"\nsecond line\"\n2,plain\n", SourceFormat::csv);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id == "1");
  CHECK(docs[0].text == "hello, \"world\"\nsecond line");
  CHECK(docs[1].text == "plain");
}

TEST_CASE("csv header with a duplicate column is fatal") {
  CHECK_THROWS_AS(read_text("id,id,contents\n1,2,x\n", SourceFormat::csv), CorpusError);
}

TEST_CASE("json array elements stream one by one") {
  auto docs = read_text(
      "[{\"id\":\"a\",\"contents\":\"x [y] {z}\",\"meta\":{\"k\":\"v\",\"n\":3}},\n {\"id\":7,\"contents\":null}]",
      SourceFormat::json);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].text == "x [y] {z}");
  CHECK(docs[0].meta == Meta{{"k", "v"}, {"n", "3"}});
  CHECK(docs[1].id == "7");
  CHECK(docs[1].text.empty());
}

TEST_CASE("byte order mark is skipped") {
  auto docs = read_text("\xEF\xBB\xBF{\"id\":\"d1\",\"contents\":\"a\"}\n", SourceFormat::jsonl);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].id == "d1");
}

TEST_CASE("extra keys are folded into meta") {
  auto docs = read_text("{\"id\":\"d1\",\"contents\":\"a\",\"url\":\"http://x\",\"score\":1.5}\n", SourceFormat::jsonl);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].meta == Meta{{"score", "1.5"}, {"url", "http://x"}});
}

TEST_CASE("malformed records are skipped with their ordinal, or fatal in strict mode") {
  const std::string text =
      "{\"id\":\"d1\",\"contents\":\"a\"}\n"
      "{broken\n"
      "{\"contents\":\"no id\"}\n"
      "{\"id\":\"d4\",\"contents\":\"b\"}\n";
  std::vector<std::size_t> skipped;
  ReadOptions lenient;
  lenient.on_skip = [&](const CorpusError& e) { skipped.push_back(e.ordinal()); };
  auto docs = read_text(text, SourceFormat::jsonl, lenient);
  REQUIRE(docs.size() == 2);
  CHECK(docs[1].id == "d4");
  CHECK(skipped == std::vector<std::size_t>{1, 2});

  ReadOptions strict;
  strict.strict = true;
  try {
    read_text(text, SourceFormat::jsonl, strict);
    FAIL("expected a corpus error");
  } catch (const CorpusError& e) {
    CHECK(e.ordinal() == 1);
  }
}

TEST_CASE("invalid utf-8 in a record is rejected") {
  ReadOptions strict;
  strict.strict = true;
  CHECK_THROWS_AS(read_text("id\tcontents\nd1\tbad \xC3\x28 byte\n", SourceFormat::tsv, strict), CorpusError);
  CHECK(read_text("id\tcontents\nd1\tbad \xC3\x28 byte\nd2\tok\n", SourceFormat::tsv).size() == 1);
}

TEST_CASE("field names are configurable") {
  std::istringstream in("{\"doc\":\"x1\",\"body\":\"hello\"}\n");
  auto source = CorpusSource::from_stream(in, SourceFormat::jsonl);
  source.fields = {"doc", "body", "meta"};
  DocumentReader reader(source);
  auto docs = drain(reader);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0] == RawDocument{"x1", "hello", {}});
}

TEST_CASE("directories are read file by file in name order") {
  TempDir dir;
  write_file(dir / "b.jsonl", "{\"id\":\"b1\",\"contents\":\"x\"}\n");
  write_file(dir / "a.jsonl", "{\"id\":\"a1\",\"contents\":\"x\"}\n{\"id\":\"a2\",\"contents\":\"y\"}\n");
  write_file(dir / "notes.txt", "ignored");
  DocumentReader reader(CorpusSource::from_path(dir.path(), SourceFormat::jsonl));
  auto docs = drain(reader);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "a1");
  CHECK(docs[1].id == "a2");
  CHECK(docs[2].id == "b1");
}

TEST_CASE("format is inferred from the extension") {
  CHECK(format_from_extension("x.jsonl") == SourceFormat::jsonl);
  CHECK(format_from_extension("x.TSV") == SourceFormat::tsv);
  CHECK_FALSE(format_from_extension("x.txt").has_value());
  CHECK_THROWS_AS(parse_format("xml"), ConfigError);
  CHECK_THROWS(CorpusSource::from_path("/nonexistent/file.txt"));
}

TEST_CASE("unreadable path is an error") {
  auto source = CorpusSource::from_path("/nonexistent/corpus.jsonl");
  CHECK_THROWS_AS(DocumentReader(source).next(), Error);
}

TEST_CASE("write_jsonl round-trips") {
  RawDocument doc{"d\"1", "text with \"quotes\"\nand newline", {{"k", "v"}}};
  std::ostringstream out;
  write_jsonl(out, doc);
  auto back = read_text(out.str(), SourceFormat::jsonl);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == doc);
}

TEST_CASE("shard assignment is ordinal modulo shard count") {
  auto run = [](std::size_t docs, std::size_t shards) {
    std::vector<RawDocument> in;
    for (std::size_t i = 0; i < docs; ++i) in.push_back({std::to_string(i), "x", {}});
    VectorDocumentStream stream(in);
    ShardAssigner assigner(stream, ShardPlan{shards, 10});
    std::vector<std::vector<std::size_t>> out(shards);
    while (auto a = assigner.next()) {
      CHECK(a->document.id == std::to_string(a->ordinal));
      out[a->shard].push_back(a->ordinal);
    }
    return out;
  };
  CHECK(run(6, 3) == std::vector<std::vector<std::size_t>>{{0, 3}, {1, 4}, {2, 5}});
  CHECK(run(5, 1) == std::vector<std::vector<std::size_t>>{{0, 1, 2, 3, 4}});
  auto four = run(10, 4);
  CHECK(four[0].size() == 3);
  CHECK(four[1].size() == 3);
  CHECK(four[2].size() == 2);
  CHECK(four[3].size() == 2);
}

TEST_CASE("shard plan validation") {
  CHECK_THROWS_AS(ShardPlan({0, 10}).validate(), ConfigError);
  CHECK_THROWS_AS(ShardPlan({1, 0}).validate(), ConfigError);
  CHECK_NOTHROW(ShardPlan({4, 1}).validate());
}
