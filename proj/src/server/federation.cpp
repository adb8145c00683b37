#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <set>

#include "shardsearch/searcher.hpp"
#include "shardsearch/server.hpp"

namespace shardsearch {
namespace {

using nlohmann::ordered_json;

HttpResponse json_response(int status, const ordered_json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
  ordered_json body;
  body["error"]["code"] = code;
  body["error"]["message"] = message;
  return json_response(status, body);
}

bool parse_switch(const ordered_json& value) {
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "on") return true;
    if (s == "off") return false;
  }
  throw ConfigError("redaction must be true, false, \"on\" or \"off\"");
}

int parse_port(std::string_view text) {
  int port = 0;
  if (text.empty() || text.size() > 5) throw ConfigError("invalid port '" + std::string(text) + "'");
  for (char c : text) {
    if (c < '0' || c > '9') throw ConfigError("invalid port '" + std::string(text) + "'");
    port = port * 10 + (c - '0');
  }
  if (port > 65535) throw ConfigError("invalid port '" + std::string(text) + "'");
  return port;
}

}  // namespace

bool is_valid_index_name(std::string_view name) {
  if (name.empty()) return false;
  for (unsigned char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '~' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::optional<std::size_t> parse_k(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::size_t value = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    value = std::min<std::size_t>(value * 10 + static_cast<std::size_t>(c - '0'), 1'000'000);
  }
  if (value < 1) return std::nullopt;
  return std::min(value, kMaxResultsPerIndex);
}

FederationConfig FederationConfig::from_json(const ordered_json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  FederationConfig config;
  auto add_index = [&](std::string name, const ordered_json& dir) {
    if (!dir.is_string()) throw ConfigError("index '" + name + "' needs a directory string");
    std::filesystem::path path = dir.get<std::string>();
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    config.indices.push_back({std::move(name), std::move(path)});
  };
  try {
    const auto& indices = j.at("indices");
    if (indices.is_object()) {
      for (const auto& [name, dir] : indices.items()) add_index(name, dir);
    } else if (indices.is_array()) {
      for (const auto& entry : indices) add_index(entry.at("name").get<std::string>(), entry.at("path"));
    } else {
      throw ConfigError("\"indices\" must be an object or an array");
    }
    if (j.contains("default_k")) {
      const auto& k = j.at("default_k");
      if (!k.is_number_integer() || k.get<long long>() < 1) throw ConfigError("default_k must be a positive integer");
      config.default_k = k.get<std::size_t>();
    }
    if (j.contains("port")) {
      const auto& p = j.at("port");
      config.port = p.is_string() ? parse_port(p.get<std::string>()) : parse_port(std::to_string(p.get<long long>()));
    }
    if (j.contains("bind_address")) config.bind_address = j.at("bind_address").get<std::string>();
    if (j.contains("redaction")) config.redaction = parse_switch(j.at("redaction"));
    if (j.contains("cors_origin")) config.cors_origin = j.at("cors_origin").get<std::string>();
    if (j.contains("redaction_rules")) {
      std::filesystem::path rules = j.at("redaction_rules").get<std::string>();
      if (rules.is_relative() && !base_dir.empty()) rules = base_dir / rules;
      config.redaction_rules = rules;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  config.validate();
  return config;
}

FederationConfig FederationConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto config = from_json(j, path.parent_path());
  config.apply_env();
  return config;
}

void FederationConfig::apply_env() {
  if (const char* port_env = std::getenv("PORT"); port_env && *port_env) port = parse_port(port_env);
  if (const char* bind_env = std::getenv("BIND_ADDR"); bind_env && *bind_env) bind_address = bind_env;
}

void FederationConfig::validate() const {
  if (indices.empty()) throw ConfigError("config lists no indices");
  std::set<std::string_view> names;
  for (const auto& index : indices) {
    if (!is_valid_index_name(index.name))
      throw ConfigError("index name '" + index.name + "' must match [A-Za-z0-9._~-]+");
    if (!names.insert(index.name).second) throw ConfigError("duplicate index name '" + index.name + "'");
  }
  if (default_k < 1) throw ConfigError("default_k must be a positive integer");
  if (port < 0 || port > 65535) throw ConfigError("port out of range");
}

FederationService::FederationService(FederationConfig config) : config_(std::move(config)) {
  config_.validate();
  std::string failures;
  for (const auto& index : config_.indices) {
    try {
      entries_.push_back({index.name, Segment::open(index.dir)});
    } catch (const std::exception& e) {
      failures += "\n  " + index.name + " (" + index.dir.string() + "): " + e.what();
    }
  }
  if (!failures.empty()) throw ConfigError("cannot open indices:" + failures);
  if (config_.redaction)
    redactor_.emplace(config_.redaction_rules.empty() ? default_rules() : load_rules(config_.redaction_rules));
}

std::shared_ptr<const Segment> FederationService::segment(std::string_view name) const {
  const auto* e = find(name);
  return e ? e->segment : nullptr;
}

const FederationService::Entry* FederationService::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

std::string FederationService::scrub(std::string_view text) const {
  return redactor_ ? redactor_->redact(text).text : std::string(text);
}

HttpResponse FederationService::health() const { return {200, "text/plain", "ok"}; }

HttpResponse FederationService::indices() const {
  ordered_json list = ordered_json::array();
  for (const auto& e : entries_) {
    ordered_json item;
    item["name"] = e.name;
    item["N"] = e.segment->snippet_count();
    item["avgdl"] = e.segment->avgdl();
    list.push_back(std::move(item));
  }
  ordered_json body;
  body["indices"] = std::move(list);
  return json_response(200, body);
}

HttpResponse FederationService::stats(std::string_view name) const {
  const auto* e = find(name);
  if (!e) return error_response(404, "not_found", "unknown index '" + scrub(name) + "'");
  const auto& seg = *e->segment;
  ordered_json body;
  body["name"] = e->name;
  body["N"] = seg.snippet_count();
  body["avgdl"] = seg.avgdl();
  body["lexicon_size"] = seg.lexicon().size();
  body["analyzer"] = seg.manifest().analyzer;
  ordered_json top = ordered_json::array();
  for (const auto& t : top_terms(seg, 20)) {
    ordered_json item;
    item["term"] = scrub(t.term);
    item["df"] = t.df;
    item["cf"] = t.cf;
    top.push_back(std::move(item));
  }
  body["top_terms"] = std::move(top);
  return json_response(200, body);
}

HttpResponse FederationService::search(const SearchRequest& request) const {
  if (!request.q) return error_response(400, "bad_request", "missing parameter 'q'");
  std::size_t k = std::min(config_.default_k, kMaxResultsPerIndex);
  if (request.k) {
    auto parsed = parse_k(*request.k);
    if (!parsed) return error_response(400, "bad_request", "k must be a positive integer");
    k = *parsed;
  }
  std::vector<const Entry*> targets;
  if (request.index) {
    const auto* e = find(*request.index);
    if (!e) return error_response(404, "not_found", "unknown index '" + scrub(*request.index) + "'");
    targets.push_back(e);
  } else {
    for (const auto& e : entries_) targets.push_back(&e);
  }

  struct Outcome {
    std::vector<ResultHit> hits;
    std::int64_t took_ms = 0;
  };
  auto run = [&](const Entry* e) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    out.hits = Searcher(e->segment).search_hydrated(*request.q, k);
    if (redactor_) redact_hits(out.hits, *redactor_);
    out.took_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                      .count();
    return out;
  };

  std::vector<Outcome> outcomes;
  try {
    if (targets.size() == 1) {
      outcomes.push_back(run(targets.front()));
    } else {
      std::vector<std::future<Outcome>> pending;
      for (const auto* e : targets) pending.push_back(std::async(std::launch::async, run, e));
      for (auto& f : pending) outcomes.push_back(f.get());
    }
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }

  ordered_json body;
  body["query"] = scrub(*request.q);
  body["k"] = k;
  body["results"] = ordered_json::object();
  body["took_ms"] = ordered_json::object();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ordered_json list = ordered_json::array();
    for (const auto& hit : outcomes[i].hits) {
      ordered_json item;
      item["id"] = hit.id;
      item["score"] = hit.score;
      item["text"] = hit.text;
      item["meta"] = hit.meta;
      item["matched_terms"] = hit.matched_terms;
      list.push_back(std::move(item));
    }
    body["results"][targets[i]->name] = std::move(list);
    body["took_ms"][targets[i]->name] = outcomes[i].took_ms;
  }
  return json_response(200, body);
}

}  // namespace shardsearch
