#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>

namespace shardsearch {

// Read-only memory mapping of a whole file. Empty files map to an empty span.
class MappedFile {
 public:
  MappedFile() = default;
  explicit MappedFile(const std::filesystem::path& path);
  ~MappedFile();

  MappedFile(MappedFile&& other) noexcept;
  MappedFile& operator=(MappedFile&& other) noexcept;
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;

  std::span<const unsigned char> bytes() const noexcept {
    return {static_cast<const unsigned char*>(data_), size_};
  }
  std::string_view view() const noexcept { return {static_cast<const char*>(data_), size_}; }
  std::size_t size() const noexcept { return size_; }

 private:
  void reset() noexcept;

  void* data_ = nullptr;
  std::size_t size_ = 0;
};

}  // namespace shardsearch
