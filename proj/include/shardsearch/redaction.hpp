#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "shardsearch/searcher.hpp"

namespace shardsearch {

// Rules always run in this order.
enum class PiiKind { email, ipv4, ipv6, phone, id_number };

std::string_view to_string(PiiKind kind);
PiiKind parse_pii_kind(std::string_view name);

struct RedactionRule {
  PiiKind kind;
  std::string pattern;  // Perl-compatible regular expression, matched case-insensitively
  std::string placeholder;
};

// email -> [EMAIL], ipv4/ipv6 -> [IP], phone -> [PHONE], id_number -> [ID].
// Phone matches need 7 to 15 digits; unprefixed phone and id matches that
// read as calendar dates, and unprefixed thousands groupings, are left alone.
const std::vector<RedactionRule>& default_rules();

// One rule per line: kind<TAB>pattern<TAB>placeholder. Blank lines and lines
// starting with '#' are ignored.
std::vector<RedactionRule> load_rules(const std::filesystem::path& path);

struct Redaction {
  std::string text;
  std::size_t count = 0;
};

// Compiled rule set; immutable and shareable across threads.
class Redactor {
 public:
  explicit Redactor(std::vector<RedactionRule> rules = default_rules());
  ~Redactor();
  Redactor(Redactor&&) noexcept;
  Redactor& operator=(Redactor&&) noexcept;

  // Replaces every maximal rule match with its placeholder, rule by rule,
  // repeating until no rule matches, so the result is a fixed point.
  Redaction redact(std::string_view text) const;

  // Rule matches present in `text`, without replacing anything.
  std::size_t count_matches(std::string_view text) const;

 private:
  struct Compiled;
  std::vector<Compiled> rules_;
};

const Redactor& default_redactor();

Redaction redact(std::string_view text);

// Redacts every outgoing string of every hit (id, text, meta values, matched
// terms) in place; scores and ranks are untouched. Returns the total count.
std::size_t redact_hits(std::vector<ResultHit>& hits, const Redactor& redactor = default_redactor());

}  // namespace shardsearch
