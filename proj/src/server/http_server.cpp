#include <httplib.h>

#include "shardsearch/server.hpp"

namespace shardsearch {

struct HttpServer::Impl {
  std::shared_ptr<const FederationService> service;
  httplib::Server server;
  int port = -1;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type.c_str());
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<const FederationService> service) : impl_(std::make_unique<Impl>()) {
  if (!service) throw ConfigError("http server needs a service");
  impl_->service = std::move(service);
  auto& svr = impl_->server;
  const auto* svc = impl_->service.get();
  const std::string origin = svc->config().cors_origin;

  // SO_REUSEADDR only: SO_REUSEPORT would let a second server share a busy port.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  svr.set_default_headers({{"Access-Control-Allow-Origin", origin},
                           {"Access-Control-Allow-Methods", "GET, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.Get("/healthz", [svc](const httplib::Request&, httplib::Response& res) { send(res, svc->health()); });
  svr.Get("/indices", [svc](const httplib::Request&, httplib::Response& res) { send(res, svc->indices()); });
  svr.Get(R"(/indices/([^/]+)/stats)", [svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->stats(req.matches[1].str()));
  });
  svr.Get("/search", [svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->search({param(req, "q"), param(req, "index"), param(req, "k")}));
  });
  svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const char* code = res.status == 404 ? "not_found" : "error";
    nlohmann::ordered_json body;
    body["error"]["code"] = code;
    body["error"]["message"] = httplib::status_message(res.status);
    res.set_content(body.dump(), "application/json");
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    nlohmann::ordered_json body;
    body["error"]["code"] = "internal";
    body["error"]["message"] = message;
    res.status = 500;
    res.set_content(body.dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const auto& config = impl_->service->config();
  if (config.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(config.bind_address);
  } else if (impl_->server.bind_to_port(config.bind_address, config.port)) {
    impl_->port = config.port;
  }
  if (impl_->port <= 0)
    throw ConfigError("cannot bind " + config.bind_address + ":" + std::to_string(config.port) +
                      " (address in use or unavailable)");
  return impl_->port;
}

void HttpServer::serve() {
  if (impl_->port <= 0) bind();
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace shardsearch
