#include <doctest.h>

#include <random>

#include <unicode/uchar.h>

#include "shardsearch/analysis.hpp"
#include "shardsearch/util/utf8.hpp"
#include "test_support.hpp"

using namespace shardsearch;
using testing_support::fixture;
using testing_support::read_file;

namespace {

using Terms = std::vector<std::string>;

std::shared_ptr<const Analyzer> simple(std::set<std::string> stopwords, bool stemming) {
  return make_analyzer(AnalyzerConfig::simple(std::move(stopwords), stemming));
}

std::shared_ptr<const Analyzer> fixture_subword(UnknownPolicy policy = UnknownPolicy::byte_fallback) {
  return make_analyzer(
      AnalyzerConfig::subword(fixture("subword_vocab.txt"), fixture("subword_merges.txt"), policy));
}

}  // namespace

TEST_CASE("simple analyzer lowercases, splits and drops stopwords") {
  CHECK(simple({"the"}, false)->analyze("The Cat, sat!") == Terms{"cat", "sat"});
  CHECK(simple({"the"}, true)->analyze("").empty());
  CHECK(simple({}, false)->analyze("e-mail: foo_bar@x.io 3.14") == Terms{"e", "mail", "foo", "bar", "x", "io", "3", "14"});
}

TEST_CASE("simple analyzer stems") {
  CHECK(make_analyzer(AnalyzerConfig::simple())->analyze("running ponies") == Terms{"run", "poni"});
}

TEST_CASE("stemmed terms that become stopwords are dropped") {
  CHECK(make_analyzer(AnalyzerConfig::simple())->analyze("ons") == Terms{});
}

TEST_CASE("simple analyzer handles unicode") {
  auto a = simple({}, false);
  // NFD input composes under NFC; full-width and Greek letters fold.
  CHECK(a->analyze("Cafe\xCC\x81 CAFÉ") == Terms{"café", "café"});
  CHECK(a->analyze("ΣΊΣΥΦΟΣ") == Terms{"σίσυφοσ"});
  CHECK(a->analyze("東京タワー２０２４") == Terms{"東京タワー２０２４"});
  CHECK(a->analyze("naïve—résumé") == Terms{"naïve", "résumé"});
  // Stemming touches only plain ascii words.
  CHECK(simple({}, true)->analyze("runnings naïvely") == Terms{"run", "naïvely"});
}

TEST_CASE("porter stemmer spot checks") {
  CHECK(stem("caresses") == "caress");
  CHECK(stem("sky") == "sky");
  CHECK(stem("a") == "a");
  CHECK(stem("is") == "is");
  CHECK(stem("ponies") == "poni");
  CHECK(stem("relational") == "relat");
  CHECK(stem("conformabli") == "conform");
  CHECK(stem("archaeology") == "archaeolog");
  CHECK(stem("generalizations") == "gener");
}

TEST_CASE("porter stemmer matches the reference vectors") {
  const auto path = std::filesystem::path(SHARDSEARCH_TEST_DATA_DIR) / "porter_vectors.tsv";
  std::size_t total = 0;
  std::size_t failures = 0;
  for (const auto& line : testing_support::read_lines(path)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const auto word = line.substr(0, tab);
    const auto expected = line.substr(tab + 1);
    ++total;
    if (stem(word) != expected) {
      if (++failures <= 10) INFO(word << " -> " << stem(word) << " expected " << expected);
      CHECK(stem(word) == expected);
    }
  }
  CHECK(total > 10000);
  CHECK(failures == 0);
}

TEST_CASE("built-in stopwords equal the shipped data file") {
  const auto path = std::filesystem::path(SHARDSEARCH_DATA_DIR) / "stopwords_en.txt";
  CHECK(load_stopwords(path) == default_stopwords());
  CHECK(default_stopwords().size() == 33);
}

TEST_CASE("config validation") {
  auto bad = AnalyzerConfig::simple({"The"}, false);
  CHECK_THROWS_AS(bad.validate(), AnalyzerError);
  CHECK_THROWS_AS(AnalyzerConfig::simple({""}, false).validate(), AnalyzerError);
  auto mixed = AnalyzerConfig::simple();
  mixed.vocab_path = "v.txt";
  CHECK_THROWS_AS(mixed.validate(), AnalyzerError);
  auto sub = AnalyzerConfig::subword("v.txt", "m.txt");
  sub.stemming = true;
  CHECK_THROWS_AS(sub.validate(), AnalyzerError);
}

TEST_CASE("digest depends only on behaviour-relevant settings") {
  auto a = simple({"a", "the"}, true);
  auto b = simple({"the", "a"}, true);
  auto c = simple({"a", "the"}, false);
  CHECK(a->digest() == b->digest());
  CHECK(a->digest() != c->digest());
  CHECK(a->digest().size() == 64);
}

TEST_CASE("subword fixture model") {
  auto model = load_subword_model(fixture("subword_vocab.txt"), fixture("subword_merges.txt"));
  CHECK(model.vocabulary.size() == 5);
  CHECK(model.merges.size() == 2);
  CHECK(model.vocabulary.at("lo") == 3);
}

TEST_CASE("subword analyzer on the fixture: hand-derived outputs") {
  auto a = fixture_subword();
  CHECK(a->analyze("low") == Terms{"low"});
  CHECK(a->analyze("lowlow") == Terms{"low", "low"});
  CHECK(a->analyze("owl") == Terms{"o", "w", "l"});
  CHECK(a->analyze(" lo  w\n") == Terms{"lo", "w"});
  CHECK(a->analyze("slow") == Terms{"low"});  // no <0x73> token to fall back to
  CHECK(a->analyze("Low") == Terms{"o", "w"});
  CHECK(a->analyze("") == Terms{});
  CHECK(fixture_subword(UnknownPolicy::drop)->analyze("slow ol") == Terms{"low", "o", "l"});
}

TEST_CASE("subword merges apply by rank, not position") {
  SubwordAnalyzer a("a\nb\nc\nab\nbc\n", "b c\na b\n", UnknownPolicy::drop);
  CHECK(a.merge_piece("abc") == Terms{"a", "bc"});
  SubwordAnalyzer swapped("a\nb\nc\nab\nbc\n", "a b\nb c\n", UnknownPolicy::drop);
  CHECK(swapped.merge_piece("abc") == Terms{"ab", "c"});
  // All non-overlapping occurrences of the best pair merge in one step.
  SubwordAnalyzer runs("a\naa\naaaa\n", "a a\naa aa\n", UnknownPolicy::drop);
  CHECK(runs.merge_piece("aaaaa") == Terms{"aaaa", "a"});
}

TEST_CASE("byte fallback emits byte tokens present in the vocabulary") {
  SubwordAnalyzer a("l\n<0xC3>\n<0xA9>\n", "", UnknownPolicy::byte_fallback);
  CHECK(a.analyze("lé") == Terms{"l", "<0xC3>", "<0xA9>"});
  SubwordAnalyzer d("l\n<0xC3>\n<0xA9>\n", "", UnknownPolicy::drop);
  CHECK(d.analyze("lé") == Terms{"l"});
}

TEST_CASE("empty merges split into characters") {
  SubwordAnalyzer a("l\no\nw\n", "", UnknownPolicy::drop);
  CHECK(a.analyze("low") == Terms{"l", "o", "w"});
}

TEST_CASE("subword model errors") {
  CHECK_THROWS_AS(parse_subword_model("x\ny\n", "x y\n"), AnalyzerError);
  CHECK_THROWS_AS(parse_subword_model("x\nx\n", ""), AnalyzerError);
  CHECK_THROWS_AS(parse_subword_model("x\n\ny\n", ""), AnalyzerError);
  CHECK_THROWS_AS(parse_subword_model("x\ny\nxy\n", "x y z\n"), AnalyzerError);
  CHECK_THROWS_AS(load_subword_model("/nonexistent/vocab.txt", fixture("subword_merges.txt")), AnalyzerError);
}

TEST_CASE("subword analyzer rebuilds from its canonical form") {
  auto a = fixture_subword();
  testing_support::TempDir dir;
  a->save_resources(dir.path());
  auto b = analyzer_from_canonical(a->canonical(), dir.path(), a->digest());
  CHECK(b->digest() == a->digest());
  CHECK(b->analyze("lowlow owl") == a->analyze("lowlow owl"));
  testing_support::write_file(dir / "vocab.txt", "l\no\nw\nlo\nlow\nextra\n");
  CHECK_THROWS_AS(analyzer_from_canonical(a->canonical(), dir.path(), a->digest()), AnalyzerError);
}

TEST_CASE("random strings: no stopwords and only alphanumeric code points") {
  auto a = make_analyzer(AnalyzerConfig::simple());
  const auto& stop = default_stopwords();
  const std::vector<char32_t> alphabet = {'a', 'T', 'h', 'e', 'n', 'o', 's', ' ', ',', '.', '-', '_', '@', '1', '9',
                                          0xE9, 0x301, 0x3A3, 0x6771, 0xFF10, 0x2014, 0x3000, 0x1F600, 0x0660, 0xA0};
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    std::string text;
    const auto len = rng() % 40;
    for (std::size_t j = 0; j < len; ++j) utf8::append(text, alphabet[rng() % alphabet.size()]);
    for (const auto& term : a->analyze(text)) {
      CHECK_FALSE(term.empty());
      CHECK_FALSE(stop.contains(term));
      for (std::size_t pos = 0; pos < term.size();) {
        const auto cp = static_cast<UChar32>(utf8::next(term, pos));
        CHECK((u_hasBinaryProperty(cp, UCHAR_ALPHABETIC) || u_charType(cp) == U_DECIMAL_DIGIT_NUMBER));
      }
    }
  }
}
