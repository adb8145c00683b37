#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "shardsearch/error.hpp"

namespace shardsearch::varint {

// LEB128: little-endian groups of 7 bits, high bit set on every byte but the last.
inline void put(std::string& out, std::uint64_t value) {
  while (value >= 0x80) {
    out.push_back(static_cast<char>((value & 0x7F) | 0x80));
    value >>= 7;
  }
  out.push_back(static_cast<char>(value));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  bool done() const noexcept { return pos_ >= bytes_.size(); }
  std::size_t position() const noexcept { return pos_; }

  std::uint64_t next() {
    std::uint64_t value = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= bytes_.size()) throw IndexError("truncated varint");
      auto byte = bytes_[pos_++];
      value |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
      if ((byte & 0x80) == 0) return value;
    }
    throw IndexError("varint longer than 10 bytes");
  }

  void skip(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IndexError("truncated block");
    pos_ += n;
  }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace shardsearch::varint
