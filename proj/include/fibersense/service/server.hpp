#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "fibersense/service/pipeline.hpp"

namespace fibersense::service {

struct HttpReply {
  unsigned status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-independent request routing, so handlers can be tested without
/// sockets. `target` is the raw request target including any query string.
class ApiRouter {
 public:
  ApiRouter(Pipeline& pipeline, std::string static_dir);

  HttpReply handle(std::string_view method, std::string_view target, std::string_view body) const;

 private:
  HttpReply serve_static(std::string_view path) const;

  Pipeline& pipeline_;
  std::string static_dir_;
};

/// {"ok":true,"data":...}
std::string ok_body(const nlohmann::json& data);
/// {"ok":false,"error":message,"error_kind":kind}
std::string error_body(std::string_view kind, std::string_view message);

/// Splits "a=1&b=x%20y" into decoded key/value pairs; later keys win.
std::map<std::string, std::string> parse_query(std::string_view query);
std::string percent_decode(std::string_view text);

/// HTTP + WebSocket front end on Boost.Beast. /api/stream upgrades to a
/// WebSocket that streams the pipeline hub; everything else goes through
/// ApiRouter.
class HttpServer {
 public:
  HttpServer(Pipeline& pipeline, const std::string& address, std::uint16_t port,
             std::string static_dir, std::size_t threads = 2);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (throws Error on failure) and starts serving.
  void start();
  void stop();
  /// Bound port; useful when constructed with port 0.
  std::uint16_t port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fibersense::service
