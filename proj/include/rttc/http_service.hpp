#pragma once

// JSON-over-HTTP plumbing shared by the knowledge-base service and the model
// protocol server/client. Handlers throw rttc::Error; the service maps it to
// a status code and an {"error": {"code", "message"}} body.

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include <nlohmann/json.hpp>

namespace rttc::http {

using nlohmann::json;

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks any free port
};

// Accepts "host:port", ":port" or "port". ConfigError when malformed.
BindAddress parse_bind_address(std::string_view text);

class JsonService {
 public:
  using JsonHandler = std::function<json(const json&)>;
  using BodyHandler = std::function<json(std::string_view)>;
  using GetHandler = std::function<json()>;

  JsonService();
  ~JsonService();
  JsonService(const JsonService&) = delete;
  JsonService& operator=(const JsonService&) = delete;

  void post_json(const std::string& path, JsonHandler handler);
  void post_body(const std::string& path, BodyHandler handler);
  void get(const std::string& path, GetHandler handler);

  // BindFailure when the socket cannot be bound. Returns the bound port.
  int bind(const BindAddress& address);
  // Serves on a background thread until stop() or destruction.
  void start();
  // Serves on the calling thread until stop().
  void run();
  void stop();

  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread worker_;
  int port_ = -1;
};

// Maps transport failures and 5xx replies to BackendUnavailable, and 4xx
// replies carrying an error body back to the originating rttc::Error code.
class JsonClient {
 public:
  explicit JsonClient(std::string base_url,
                      std::chrono::milliseconds timeout = std::chrono::seconds(30));

  json post(const std::string& path, const json& body) const;
  json post_body(const std::string& path, const std::string& body,
                 const std::string& content_type) const;
  json get(const std::string& path) const;

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace rttc::http
