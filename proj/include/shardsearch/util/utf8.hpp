#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace shardsearch::utf8 {

inline constexpr char32_t kInvalid = 0xFFFFFFFF;

// Strict UTF-8: no overlong forms, no encoded surrogates, nothing above U+10FFFF.
bool is_valid(std::string_view s) noexcept;

// Decodes the code point starting at s[pos] and advances pos past it. Malformed
// input yields kInvalid and advances by one byte.
char32_t next(std::string_view s, std::size_t& pos) noexcept;

void append(std::string& out, char32_t cp);

bool is_space(char32_t cp) noexcept;

// Maximal runs of non-whitespace code points, in order.
std::vector<std::string_view> split_whitespace(std::string_view s);

}  // namespace shardsearch::utf8
