#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shardsearch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A corpus record could not be read or decoded. `ordinal` is the 0-based
// position of the record within the ingestion run.
class CorpusError : public Error {
 public:
  CorpusError(std::size_t ordinal, const std::string& what)
      : Error("record " + std::to_string(ordinal) + ": " + what), ordinal_(ordinal) {}

  std::size_t ordinal() const noexcept { return ordinal_; }

 private:
  std::size_t ordinal_;
};

class AnalyzerError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class DiskFullError : public IndexError {
 public:
  using IndexError::IndexError;
};

class QueryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace shardsearch
