#include <algorithm>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "shardsearch/analysis.hpp"
#include "shardsearch/util/utf8.hpp"

namespace shardsearch {
namespace {

nlohmann::json simple_canonical(const std::set<std::string>& stopwords, bool stemming) {
  return {{"kind", "simple"}, {"stopwords", stopwords}, {"stemming", stemming}};
}

bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool is_ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_lower_alpha(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

bool is_alnum(UChar32 c) {
  return u_hasBinaryProperty(c, UCHAR_ALPHABETIC) || u_charType(c) == U_DECIMAL_DIGIT_NUMBER;
}

}  // namespace

SimpleAnalyzer::SimpleAnalyzer(std::set<std::string> stopwords, bool stemming)
    : Analyzer(AnalyzerKind::simple, simple_canonical(stopwords, stemming)),
      stopwords_(std::move(stopwords)),
      stemming_(stemming) {}

void SimpleAnalyzer::emit(std::string& term, std::vector<std::string>& out) const {
  if (term.empty()) return;
  if (!stopwords_.contains(term)) {
    if (stemming_ && is_lower_alpha(term)) term = stem(term);
    // Stemming can land on a stopword ("ons" -> "on").
    if (!stopwords_.contains(term)) out.push_back(std::move(term));
  }
  term.clear();
}

std::vector<std::string> SimpleAnalyzer::analyze(std::string_view text) const {
  std::vector<std::string> out;
  std::string term;

  // NFC and case folding are the identity / ASCII lowercase on ASCII input.
  if (is_ascii(text)) {
    for (char c : text) {
      if (is_ascii_alnum(c)) {
        term.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
      } else {
        emit(term, out);
      }
    }
    emit(term, out);
    return out;
  }

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw AnalyzerError("ICU NFC normalizer unavailable");
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = nfc->normalize(source, status);
  if (U_FAILURE(status)) throw AnalyzerError("NFC normalization failed");

  for (int32_t i = 0; i < normalized.length(); i = normalized.moveIndex32(i, 1)) {
    const UChar32 c = u_foldCase(normalized.char32At(i), U_FOLD_CASE_DEFAULT);
    if (is_alnum(c)) {
      utf8::append(term, static_cast<char32_t>(c));
    } else {
      emit(term, out);
    }
  }
  emit(term, out);
  return out;
}

}  // namespace shardsearch
