#include "shardsearch/corpus.hpp"

namespace shardsearch {
namespace {

using nlohmann::json;

struct FieldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string as_text(const json& value) {
  return value.is_string() ? value.get<std::string>() : value.dump();
}

}  // namespace

RawDocument to_document(const json& record, const FieldMap& fields) {
  RawDocument doc;

  auto id = record.find(fields.id);
  if (id == record.end()) throw FieldError("missing id field '" + fields.id + "'");
  if (id->is_string()) {
    doc.id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    doc.id = id->dump();
  } else {
    throw FieldError("id field '" + fields.id + "' must be a string or integer");
  }
  if (doc.id.empty()) throw FieldError("empty id");

  auto text = record.find(fields.text);
  if (text == record.end()) throw FieldError("missing text field '" + fields.text + "'");
  if (text->is_string()) {
    doc.text = text->get<std::string>();
  } else if (!text->is_null()) {
    throw FieldError("text field '" + fields.text + "' must be a string");
  }

  if (auto meta = record.find(fields.meta); meta != record.end()) {
    if (!meta->is_object()) throw FieldError("meta field '" + fields.meta + "' must be an object");
    for (const auto& [key, value] : meta->items()) doc.meta.emplace(key, as_text(value));
  }
  for (const auto& [key, value] : record.items()) {
    if (key == fields.id || key == fields.text || key == fields.meta) continue;
    doc.meta.emplace(key, as_text(value));
  }
  return doc;
}

DocumentReader::DocumentReader(CorpusSource source, ReadOptions options)
    : fields_(source.fields), records_(std::move(source), std::move(options)) {}

std::optional<RawDocument> DocumentReader::next() {
  while (auto record = records_.next()) {
    try {
      return to_document(*record, fields_);
    } catch (const FieldError& e) {
      records_.reject(records_.records_seen() - 1, e.what());
    }
  }
  return std::nullopt;
}

std::unique_ptr<DocumentReader> open_source(const CorpusSource& source, ReadOptions options) {
  return std::make_unique<DocumentReader>(source, std::move(options));
}

void write_jsonl(std::ostream& out, const RawDocument& doc) {
  json obj = {{"id", doc.id}, {"contents", doc.text}, {"meta", doc.meta}};
  out << obj.dump() << '\n';
}

}  // namespace shardsearch
