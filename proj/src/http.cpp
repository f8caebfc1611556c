// Eigen must be seen before httplib: a resolver header it pulls in defines a
// `res` macro that collides with Eigen parameter names.
#include "xview/errors.hpp"
#include "xview/service.hpp"

#include "httplib.h"

namespace xview {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& reason,
                const std::string& detail) {
  send(res, status, {{"reason", reason}, {"error", detail}});
}

template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const RequestError& e) {
    send_error(res, e.status(), e.reason(), e.what());
  } catch (const Error& e) {
    send_error(res, 400, std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal_error", e.what());
  }
}

}  // namespace

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(const Service& service) : impl_(new Impl{service, {}}) {
  httplib::Server& s = impl_->server;
  const Service& svc = impl_->service;
  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send(res, 200, {{"status", "ok"}});
  });
  s.Get("/scenes", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.list_scenes()); });
  });
  s.Get(R"(/scenes/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const bool tracks = req.has_param("tracks") && req.get_param_value("tracks") == "1";
      send(res, 200, svc.scene(req.matches[1].str(), tracks));
    });
  });
  s.Post("/transform", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        throw RequestError(400, "invalid_json", e.what());
      }
      send(res, 200, svc.transform(parse_transform_request(body)).to_json());
    });
  });
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      send_error(res, res.status, res.status == 404 ? "not_found" : "error", "");
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) raise(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    raise(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace xview
