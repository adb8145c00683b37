#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <utility>

#include "shardsearch/corpus.hpp"
#include "shardsearch/util/utf8.hpp"

namespace shardsearch {
namespace {

using nlohmann::json;

// Recoverable: the offending record can be skipped.
struct MalformedRecord : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unrecoverable: the input cannot be resynchronized.
struct FatalInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  });
}

void skip_bom(std::istream& in) {
  if (in.peek() != 0xEF) return;
  char bom[3];
  in.read(bom, 3);
  if (in.gcount() == 3 && static_cast<unsigned char>(bom[1]) == 0xBB &&
      static_cast<unsigned char>(bom[2]) == 0xBF)
    return;
  throw FatalInput("invalid UTF-8 at start of input");
}

json parse_object(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedRecord(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedRecord("expected a JSON object");
  return j;
}

}  // namespace

class RecordReader::Parser {
 public:
  explicit Parser(std::istream& in) : in_(in) {}
  virtual ~Parser() = default;
  virtual std::optional<json> next() = 0;

 protected:
  std::istream& in_;
};

namespace {

class JsonlParser final : public RecordReader::Parser {
 public:
  using Parser::Parser;

  std::optional<json> next() override {
    std::string line;
    while (std::getline(in_, line)) {
      if (is_blank(line)) continue;
      return parse_object(line);
    }
    if (in_.bad()) throw FatalInput("read error");
    return std::nullopt;
  }
};

// Pulls one element at a time out of a top-level JSON array without reading
// the rest of the array.
class JsonArrayParser final : public RecordReader::Parser {
 public:
  using Parser::Parser;

  std::optional<json> next() override {
    if (done_) return std::nullopt;
    skip_ws();
    int c = in_.get();
    if (!started_) {
      started_ = true;
      if (c == EOF) return finish();
      if (c != '[') throw FatalInput("expected '[' at start of JSON array");
      skip_ws();
      if (in_.peek() == ']') {
        in_.get();
        return finish();
      }
    } else {
      if (c == ']') return finish();
      if (c != ',') throw FatalInput("expected ',' or ']' between array elements");
      skip_ws();
    }
    return parse_object(scan_value());
  }

 private:
  std::optional<json> finish() {
    done_ = true;
    skip_ws();
    if (in_.peek() != EOF) throw FatalInput("trailing data after JSON array");
    return std::nullopt;
  }

  void skip_ws() {
    while (true) {
      int c = in_.peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        in_.get();
      } else {
        return;
      }
    }
  }

  std::string scan_value() {
    std::string out;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    while (true) {
      int c = in_.peek();
      if (c == EOF) throw FatalInput("unterminated JSON array");
      if (!in_string && depth == 0 && (c == ',' || c == ']')) {
        if (out.empty()) throw FatalInput("empty array element");
        return out;
      }
      in_.get();
      out.push_back(static_cast<char>(c));
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
      } else if (c == '"') {
        in_string = true;
      } else if (c == '{' || c == '[') {
        ++depth;
      } else if (c == '}' || c == ']') {
        if (--depth < 0) throw FatalInput("unbalanced brackets in JSON array");
      }
    }
  }

  bool started_ = false;
  bool done_ = false;
};

// CSV/TSV with a header row. Quoted fields may contain the delimiter and
// doubled quotes; newlines inside quotes are accepted only when
// `multiline_quotes` is set (CSV).
class DelimitedParser final : public RecordReader::Parser {
 public:
  DelimitedParser(std::istream& in, char delim, bool multiline_quotes)
      : Parser(in), delim_(delim), multiline_(multiline_quotes) {}

  std::optional<json> next() override {
    std::vector<std::string> row;
    std::string error;
    if (header_.empty()) {
      if (!read_row(row, error)) return std::nullopt;
      if (!error.empty()) throw FatalInput("malformed header row: " + error);
      for (auto& name : row) {
        if (std::find(header_.begin(), header_.end(), name) != header_.end())
          throw FatalInput("duplicate column '" + name + "' in header");
        header_.push_back(name);
      }
    }
    while (read_row(row, error)) {
      if (row.size() == 1 && row[0].empty() && error.empty()) continue;
      if (!error.empty()) throw MalformedRecord(error);
      if (row.size() != header_.size())
        throw MalformedRecord("expected " + std::to_string(header_.size()) + " fields, got " +
                              std::to_string(row.size()));
      json obj = json::object();
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!utf8::is_valid(row[i]))
          throw MalformedRecord("invalid UTF-8 in column '" + header_[i] + "'");
        obj[header_[i]] = std::move(row[i]);
      }
      return obj;
    }
    if (in_.bad()) throw FatalInput("read error");
    return std::nullopt;
  }

  const std::vector<std::string>& header() const { return header_; }

 private:
  bool read_row(std::vector<std::string>& fields, std::string& error) {
    fields.clear();
    error.clear();
    std::string field;
    bool any = false;
    bool in_quotes = false;
    bool quoted = false;
    bool after_quote = false;
    while (true) {
      int c = in_.get();
      if (c == EOF) {
        if (!any) return false;
        if (in_quotes) error = "unterminated quoted field";
        break;
      }
      any = true;
      if (in_quotes) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            in_quotes = false;
            after_quote = true;
          }
        } else if (c == '\n' && !multiline_) {
          error = "newline inside quoted field";
          break;
        } else {
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == delim_) {
        fields.push_back(std::move(field));
        field.clear();
        quoted = after_quote = false;
      } else if (c == '\n') {
        break;
      } else if (c == '\r' && in_.peek() == '\n') {
        continue;
      } else if (c == '"' && field.empty() && !quoted) {
        in_quotes = quoted = true;
      } else {
        if (after_quote && error.empty()) error = "unexpected character after closing quote";
        field.push_back(static_cast<char>(c));
      }
    }
    fields.push_back(std::move(field));
    return true;
  }

  char delim_;
  bool multiline_;
  std::vector<std::string> header_;
};

std::unique_ptr<RecordReader::Parser> make_parser(std::istream& in, SourceFormat format) {
  skip_bom(in);
  switch (format) {
    case SourceFormat::jsonl:
      return std::make_unique<JsonlParser>(in);
    case SourceFormat::json:
      return std::make_unique<JsonArrayParser>(in);
    case SourceFormat::csv:
      return std::make_unique<DelimitedParser>(in, ',', true);
    case SourceFormat::tsv:
      return std::make_unique<DelimitedParser>(in, '\t', false);
  }
  throw ConfigError("unknown format");
}

}  // namespace

SourceFormat parse_format(std::string_view name) {
  if (name == "jsonl") return SourceFormat::jsonl;
  if (name == "json") return SourceFormat::json;
  if (name == "csv") return SourceFormat::csv;
  if (name == "tsv") return SourceFormat::tsv;
  throw ConfigError("unknown format '" + std::string(name) + "' (expected jsonl, json, csv or tsv)");
}

std::string_view to_string(SourceFormat format) {
  switch (format) {
    case SourceFormat::jsonl:
      return "jsonl";
    case SourceFormat::json:
      return "json";
    case SourceFormat::csv:
      return "csv";
    case SourceFormat::tsv:
      return "tsv";
  }
  return "?";
}

std::optional<SourceFormat> format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext.empty()) return std::nullopt;
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  try {
    return parse_format(std::string_view(ext).substr(1));
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

CorpusSource CorpusSource::from_path(const std::filesystem::path& path,
                                     std::optional<SourceFormat> format) {
  CorpusSource src;
  src.path = path;
  if (path == "-") {
    src.kind = SourceKind::stream;
    src.stream = &std::cin;
    src.format = format.value_or(SourceFormat::jsonl);
    return src;
  }
  if (std::filesystem::is_directory(path)) {
    src.kind = SourceKind::directory;
    src.format = format.value_or(SourceFormat::jsonl);
    return src;
  }
  src.kind = SourceKind::file;
  if (format) {
    src.format = *format;
  } else if (auto inferred = format_from_extension(path)) {
    src.format = *inferred;
  } else {
    throw ConfigError("cannot infer format of " + path.string() + "; pass it explicitly");
  }
  return src;
}

CorpusSource CorpusSource::from_stream(std::istream& in, SourceFormat format) {
  CorpusSource src;
  src.kind = SourceKind::stream;
  src.format = format;
  src.path = "-";
  src.stream = &in;
  return src;
}

RecordReader::RecordReader(CorpusSource source, ReadOptions options)
    : source_(std::move(source)), options_(std::move(options)) {
  switch (source_.kind) {
    case SourceKind::stream:
      if (source_.stream == nullptr) source_.stream = &std::cin;
      files_.push_back("-");
      break;
    case SourceKind::file:
      if (!std::filesystem::is_regular_file(source_.path))
        throw Error("cannot read " + source_.path.string() + ": not a readable file");
      files_.push_back(source_.path);
      break;
    case SourceKind::directory: {
      if (!std::filesystem::is_directory(source_.path))
        throw Error("cannot read " + source_.path.string() + ": not a directory");
      for (const auto& entry : std::filesystem::directory_iterator(source_.path)) {
        if (entry.is_regular_file() && format_from_extension(entry.path()) == source_.format)
          files_.push_back(entry.path());
      }
      std::sort(files_.begin(), files_.end());
      break;
    }
  }
}

RecordReader::~RecordReader() = default;
RecordReader::RecordReader(RecordReader&&) noexcept = default;
RecordReader& RecordReader::operator=(RecordReader&&) noexcept = default;

bool RecordReader::open_next_input() {
  parser_.reset();
  owned_.reset();
  if (next_file_ >= files_.size()) return false;
  const auto& path = files_[next_file_++];
  current_name_ = path.string();
  std::istream* in = source_.stream;
  if (source_.kind != SourceKind::stream) {
    auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file) throw Error("cannot open " + current_name_);
    owned_ = std::move(file);
    in = owned_.get();
  }
  try {
    parser_ = make_parser(*in, source_.format);
  } catch (const FatalInput& e) {
    throw CorpusError(ordinal_, current_name_ + ": " + e.what());
  }
  return true;
}

std::optional<nlohmann::json> RecordReader::next() {
  while (true) {
    if (!parser_ && !open_next_input()) return std::nullopt;
    try {
      auto record = parser_->next();
      if (!record) {
        parser_.reset();
        continue;
      }
      ++ordinal_;
      return record;
    } catch (const MalformedRecord& e) {
      reject(ordinal_++, current_name_ + ": " + e.what());
    } catch (const FatalInput& e) {
      throw CorpusError(ordinal_, current_name_ + ": " + e.what());
    }
  }
}

void RecordReader::reject(std::size_t ordinal, const std::string& why) {
  CorpusError err(ordinal, why);
  if (options_.strict) throw err;
  ++skipped_;
  if (options_.on_skip) options_.on_skip(err);
}

}  // namespace shardsearch
