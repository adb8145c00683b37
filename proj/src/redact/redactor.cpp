#include <algorithm>
#include <array>
#include <fstream>

#include <boost/regex.hpp>

#include "shardsearch/error.hpp"
#include "shardsearch/redaction.hpp"

namespace shardsearch {
namespace {

constexpr std::array<std::string_view, 5> kKindNames = {"email", "ipv4", "ipv6", "phone", "id_number"};
constexpr int kMaxPasses = 8;

const char* const kEmail =
    R"((?<![A-Za-z0-9._%+\-])[A-Za-z0-9._%+\-]+@[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?)"
    R"((?:\.[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?)*\.[A-Za-z]{2,}(?![A-Za-z0-9\-]))";

#define OCTET "(?:25[0-5]|2[0-4][0-9]|1[0-9]{2}|[1-9]?[0-9])"
const char* const kIpv4 = R"((?<![\w.])(?:)" OCTET R"(\.){3})" OCTET R"((?![\w]|\.\d))";
#undef OCTET

#define H "[0-9a-f]{1,4}"
const char* const kIpv6 =
    "(?<![\\w:])(?:"
    "(?:" H ":){7}" H
    "|(?:" H ":){1,7}:"
    "|(?:" H ":){1,6}:" H
    "|(?:" H ":){1,5}(?::" H "){1,2}"
    "|(?:" H ":){1,4}(?::" H "){1,3}"
    "|(?:" H ":){1,3}(?::" H "){1,4}"
    "|(?:" H ":){1,2}(?::" H "){1,5}"
    "|" H ":(?::" H "){1,6}"
    "|:(?::" H "){1,7}"
    ")(?![\\w:])";
#undef H

const char* const kPhone =
    R"((?<![\w+.\-])(?:\+\d{7,15}|(?:\+\d{1,3}[ .\-]?)?(?:\(\d{1,4}\)[ .\-]?)?\d{1,6}(?:[ .\-]\d{1,6}){1,6}))"
    R"((?!\w|[.\-]\d))";

const char* const kIdNumber = R"((?<![\w.])(?:\d{4}(?: \d{4}){2,4}|\d(?:-?\d){7,})(?!\w|\.\d))";

std::size_t digit_count(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }));
}

std::vector<std::string_view> digit_groups(std::string_view s) {
  std::vector<std::string_view> groups;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !(s[i] >= '0' && s[i] <= '9')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i > start) groups.push_back(s.substr(start, i - start));
  }
  return groups;
}

// Calendar dates (2024-01-31, 31.01.2024) and year ranges (1999-2004).
bool looks_like_date(std::string_view s) {
  static const boost::regex date(
      R"(\d{4}[\-./]\d{1,2}[\-./]\d{1,2}|\d{1,2}[\-./]\d{1,2}[\-./]\d{4}|(?:1[89]|20)\d{2}-(?:1[89]|20)\d{2})");
  return boost::regex_match(s.begin(), s.end(), date);
}

bool accept_phone(std::string_view s) {
  const auto digits = digit_count(s);
  if (digits < 7 || digits > 15) return false;
  if (s.front() == '+' || s.find('(') != std::string_view::npos) return true;
  if (looks_like_date(s)) return false;
  static const boost::regex ssn(R"(\d{3}-\d{2}-\d{4})");
  if (boost::regex_match(s.begin(), s.end(), ssn)) return false;
  const auto groups = digit_groups(s);
  if (groups.size() < 2) return false;
  std::string separators;
  for (char c : s)
    if (c == ' ' || c == '.' || c == '-') separators.push_back(c);
  if (groups.size() == 2 && separators != "-") return false;
  // 10 000 000 and 1.250.000 are amounts.
  if (separators.find('-') == std::string::npos && groups.front().size() <= 3 &&
      std::all_of(groups.begin() + 1, groups.end(), [](auto g) { return g.size() == 3; }))
    return false;
  return true;
}

bool accept(PiiKind kind, std::string_view s) {
  switch (kind) {
    case PiiKind::phone:
      return accept_phone(s);
    case PiiKind::id_number:
      return !looks_like_date(s);
    default:
      return true;
  }
}

}  // namespace

std::string_view to_string(PiiKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

PiiKind parse_pii_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<PiiKind>(i);
  throw ConfigError("unknown redaction kind '" + std::string(name) + "'");
}

const std::vector<RedactionRule>& default_rules() {
  static const std::vector<RedactionRule> rules = {
      {PiiKind::email, kEmail, "[EMAIL]"},  {PiiKind::ipv4, kIpv4, "[IP]"},
      {PiiKind::ipv6, kIpv6, "[IP]"},       {PiiKind::phone, kPhone, "[PHONE]"},
      {PiiKind::id_number, kIdNumber, "[ID]"},
  };
  return rules;
}

std::vector<RedactionRule> load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read redaction rules " + path.string());
  std::vector<RedactionRule> rules;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected kind<TAB>pattern<TAB>placeholder");
    RedactionRule rule{parse_pii_kind(std::string_view(line).substr(0, a)), line.substr(a + 1, b - a - 1),
                       line.substr(b + 1)};
    if (rule.pattern.empty()) throw ConfigError(path.string() + ":" + std::to_string(n) + ": empty pattern");
    rules.push_back(std::move(rule));
  }
  std::stable_sort(rules.begin(), rules.end(), [](const auto& x, const auto& y) { return x.kind < y.kind; });
  return rules;
}

struct Redactor::Compiled {
  PiiKind kind;
  boost::regex regex;
  std::string placeholder;
};

Redactor::Redactor(std::vector<RedactionRule> rules) {
  for (auto& rule : rules) {
    try {
      rules_.push_back({rule.kind, boost::regex(rule.pattern, boost::regex::perl | boost::regex::icase),
                        std::move(rule.placeholder)});
    } catch (const boost::regex_error& e) {
      throw ConfigError("invalid " + std::string(to_string(rule.kind)) + " pattern: " + e.what());
    }
  }
}

Redactor::~Redactor() = default;
Redactor::Redactor(Redactor&&) noexcept = default;
Redactor& Redactor::operator=(Redactor&&) noexcept = default;

Redaction Redactor::redact(std::string_view text) const {
  Redaction result{std::string(text), 0};
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    std::size_t replaced = 0;
    for (const auto& rule : rules_) {
      const std::string& in = result.text;
      std::string out;
      auto last = in.begin();
      for (boost::sregex_iterator it(in.begin(), in.end(), rule.regex), end; it != end; ++it) {
        const auto& m = (*it)[0];
        if (m.length() == 0 || !accept(rule.kind, std::string_view(&*m.first, m.length()))) continue;
        out.append(last, m.first);
        out += rule.placeholder;
        last = m.second;
        ++replaced;
      }
      if (last == in.begin()) continue;
      out.append(last, in.end());
      result.text = std::move(out);
    }
    result.count += replaced;
    if (replaced == 0) break;
  }
  return result;
}

std::size_t Redactor::count_matches(std::string_view text) const {
  const std::string in(text);
  std::size_t count = 0;
  for (const auto& rule : rules_)
    for (boost::sregex_iterator it(in.begin(), in.end(), rule.regex), end; it != end; ++it) {
      const auto& m = (*it)[0];
      if (m.length() > 0 && accept(rule.kind, std::string_view(&*m.first, m.length()))) ++count;
    }
  return count;
}

const Redactor& default_redactor() {
  static const Redactor redactor;
  return redactor;
}

Redaction redact(std::string_view text) { return default_redactor().redact(text); }

std::size_t redact_hits(std::vector<ResultHit>& hits, const Redactor& redactor) {
  std::size_t count = 0;
  auto apply = [&](std::string& s) {
    auto r = redactor.redact(s);
    count += r.count;
    s = std::move(r.text);
  };
  for (auto& hit : hits) {
    apply(hit.id);
    apply(hit.text);
    for (auto& [key, value] : hit.meta) apply(value);
    for (auto& term : hit.matched_terms) apply(term);
  }
  return count;
}

}  // namespace shardsearch
