#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shardsearch/index.hpp"
#include "shardsearch/redaction.hpp"

namespace shardsearch {

inline constexpr std::size_t kMaxResultsPerIndex = 100;

struct IndexConfig {
  std::string name;  // [A-Za-z0-9._~-]+
  std::filesystem::path dir;
};

struct FederationConfig {
  std::vector<IndexConfig> indices;  // response lists follow this order
  std::size_t default_k = 10;
  int port = 8080;
  std::string bind_address = "127.0.0.1";
  bool redaction = true;
  std::string cors_origin = "*";
  std::filesystem::path redaction_rules;  // empty: built-in rules

  // Relative index directories are resolved against `base_dir`.
  //   {"indices": {"name": "dir", ...} | [{"name": ..., "path": ...}],
  //    "default_k", "port", "bind_address", "redaction": true|false|"on"|"off",
  //    "cors_origin", "redaction_rules"}
  static FederationConfig from_json(const nlohmann::ordered_json& j,
                                    const std::filesystem::path& base_dir = {});
  // Reads a config file, then applies the PORT and BIND_ADDR environment overrides.
  static FederationConfig load(const std::filesystem::path& path);

  void apply_env();
  void validate() const;
};

bool is_valid_index_name(std::string_view name);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct SearchRequest {
  std::optional<std::string> q;
  std::optional<std::string> index;
  std::optional<std::string> k;
};

// Request handlers over a fixed set of open segments. Thread-safe; the HTTP
// layer is a thin adapter over these.
class FederationService {
 public:
  // Opens every segment; fails with one error naming every index that could
  // not be opened.
  explicit FederationService(FederationConfig config);

  const FederationConfig& config() const noexcept { return config_; }
  std::shared_ptr<const Segment> segment(std::string_view name) const;

  HttpResponse health() const;
  HttpResponse indices() const;
  HttpResponse stats(std::string_view name) const;
  HttpResponse search(const SearchRequest& request) const;

 private:
  struct Entry {
    std::string name;
    std::shared_ptr<const Segment> segment;
  };

  const Entry* find(std::string_view name) const;
  std::string scrub(std::string_view text) const;

  FederationConfig config_;
  std::vector<Entry> entries_;
  std::optional<Redactor> redactor_;
};

// Parses a k parameter: a positive decimal integer, capped at
// kMaxResultsPerIndex. nullopt when malformed.
std::optional<std::size_t> parse_k(std::string_view text);

class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<const FederationService> service);
  ~HttpServer();

  // Binds the configured address and port (port 0 picks a free one) and
  // returns the bound port.
  int bind();
  // Serves until stop(); in-flight requests complete first.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shardsearch
