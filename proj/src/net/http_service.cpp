#include "rttc/http_service.hpp"

#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "rttc/error.hpp"

namespace rttc::http {

namespace {

json error_body(std::string_view code, std::string_view message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable: return 503;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

template <typename Fn>
void respond(httplib::Response& res, Fn&& fn) {
  try {
    res.set_content(fn().dump(), "application/json");
    res.status = 200;
  } catch (const Error& e) {
    res.status = status_for(e.code());
    res.set_content(error_body(to_string(e.code()), e.detail()).dump(), "application/json");
  } catch (const json::exception& e) {
    res.status = 400;
    res.set_content(error_body("ParseError", e.what()).dump(), "application/json");
  } catch (const std::exception& e) {
    spdlog::error("handler failed: {}", e.what());
    res.status = 500;
    res.set_content(error_body("Internal", e.what()).dump(), "application/json");
  }
}

json parse_reply(const httplib::Result& result, const std::string& url) {
  if (!result) {
    throw Error(ErrorCode::BackendUnavailable,
                url + ": " + httplib::to_string(result.error()));
  }
  json body;
  try {
    body = json::parse(result->body);
  } catch (const json::exception&) {
    if (result->status >= 500 || result->status == 200) {
      throw Error(ErrorCode::BackendUnavailable, url + ": malformed reply body");
    }
    throw Error(ErrorCode::ParseError, url + ": status " + std::to_string(result->status));
  }
  if (result->status == 200) return body;
  const std::string message = body.contains("error") ? body["error"].value("message", "") : "";
  if (result->status >= 500) {
    throw Error(ErrorCode::BackendUnavailable,
                url + ": status " + std::to_string(result->status) + " " + message);
  }
  const std::string code = body.contains("error") ? body["error"].value("code", "") : "";
  throw Error(error_code_from_string(code), message.empty() ? url : message);
}

}  // namespace

BindAddress parse_bind_address(std::string_view text) {
  BindAddress out;
  std::string_view port_part = text;
  if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) out.host = std::string(text.substr(0, colon));
    port_part = text.substr(colon + 1);
  }
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_part.data(), port_part.data() + port_part.size(), port);
  if (ec != std::errc() || ptr != port_part.data() + port_part.size() || port < 0 ||
      port > 65535) {
    throw Error(ErrorCode::ConfigError, "bad bind address '" + std::string(text) + "'");
  }
  out.port = port;
  return out;
}

struct JsonService::Impl {
  httplib::Server server;
};

JsonService::JsonService() : impl_(std::make_unique<Impl>()) {
  // httplib's default adds SO_REUSEPORT, which lets a second server share a busy port.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
}

JsonService::~JsonService() { stop(); }

void JsonService::post_json(const std::string& path, JsonHandler handler) {
  impl_->server.Post(path, [handler = std::move(handler)](const httplib::Request& req,
                                                          httplib::Response& res) {
    respond(res, [&] { return handler(json::parse(req.body)); });
  });
}

void JsonService::post_body(const std::string& path, BodyHandler handler) {
  impl_->server.Post(path, [handler = std::move(handler)](const httplib::Request& req,
                                                          httplib::Response& res) {
    respond(res, [&] { return handler(req.body); });
  });
}

void JsonService::get(const std::string& path, GetHandler handler) {
  impl_->server.Get(path, [handler = std::move(handler)](const httplib::Request&,
                                                         httplib::Response& res) {
    respond(res, [&] { return handler(); });
  });
}

int JsonService::bind(const BindAddress& address) {
  if (address.port == 0) {
    port_ = impl_->server.bind_to_any_port(address.host);
  } else {
    port_ = impl_->server.bind_to_port(address.host, address.port) ? address.port : -1;
  }
  if (port_ < 0) {
    throw Error(ErrorCode::BindFailure,
                "cannot bind " + address.host + ":" + std::to_string(address.port));
  }
  return port_;
}

void JsonService::start() {
  worker_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void JsonService::run() { impl_->server.listen_after_bind(); }

void JsonService::stop() {
  if (impl_) impl_->server.stop();
  if (worker_.joinable()) worker_.join();
}

JsonClient::JsonClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

namespace {

httplib::Client make_client(const std::string& url, std::chrono::milliseconds timeout) {
  httplib::Client client(url);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

}  // namespace

json JsonClient::post(const std::string& path, const json& body) const {
  return post_body(path, body.dump(), "application/json");
}

json JsonClient::post_body(const std::string& path, const std::string& body,
                           const std::string& content_type) const {
  auto client = make_client(base_url_, timeout_);
  return parse_reply(client.Post(path, body, content_type), base_url_ + path);
}

json JsonClient::get(const std::string& path) const {
  auto client = make_client(base_url_, timeout_);
  return parse_reply(client.Get(path), base_url_ + path);
}

}  // namespace rttc::http
