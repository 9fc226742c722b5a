#include "fibersense/service/server.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "fibersense/errors.hpp"
#include "fibersense/sim/json_io.hpp"

namespace fibersense::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::string_view kPlaceholderPage =
    "<!doctype html><html><head><title>fibersense</title></head><body>"
    "<p>No console bundle configured (set static_dir). API: /api/status, /api/config, "
    "/api/events, /api/control/{fan,audio,car}, WebSocket /api/stream.</p></body></html>";

std::string_view content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".wasm") return "application/wasm";
  if (ext == ".txt") return "text/plain; charset=utf-8";
  return "application/octet-stream";
}

HttpReply json_reply(unsigned status, std::string body) {
  return {status, "application/json", std::move(body)};
}

HttpReply error_reply(unsigned status, std::string_view kind, std::string_view message) {
  return json_reply(status, error_body(kind, message));
}

nlohmann::json parse_body(std::string_view body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

std::optional<std::string> query_value(const std::map<std::string, std::string>& q,
                                       const char* key) {
  auto it = q.find(key);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

}  // namespace

std::string ok_body(const nlohmann::json& data) {
  return nlohmann::json{{"ok", true}, {"data", data}}.dump();
}

std::string error_body(std::string_view kind, std::string_view message) {
  return nlohmann::json{{"ok", false}, {"error", message}, {"error_kind", kind}}.dump();
}

std::string percent_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '+') {
      out += ' ';
    } else if (c == '%' && i + 2 < text.size()) {
      const auto hex = std::string(text.substr(i + 1, 2));
      char* end = nullptr;
      const long v = std::strtol(hex.c_str(), &end, 16);
      if (end == hex.c_str() + 2) {
        out += static_cast<char>(v);
        i += 2;
      } else {
        out += c;
      }
    } else {
      out += c;
    }
  }
  return out;
}

std::map<std::string, std::string> parse_query(std::string_view query) {
  std::map<std::string, std::string> out;
  while (!query.empty()) {
    const auto amp = query.find('&');
    const auto part = query.substr(0, amp);
    if (!part.empty()) {
      const auto eq = part.find('=');
      if (eq == std::string_view::npos) {
        out[percent_decode(part)] = "";
      } else {
        out[percent_decode(part.substr(0, eq))] = percent_decode(part.substr(eq + 1));
      }
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return out;
}

ApiRouter::ApiRouter(Pipeline& pipeline, std::string static_dir)
    : pipeline_(pipeline), static_dir_(std::move(static_dir)) {}

HttpReply ApiRouter::serve_static(std::string_view path) const {
  if (static_dir_.empty()) {
    if (path == "/" || path == "/index.html") {
      return {200, "text/html; charset=utf-8", std::string(kPlaceholderPage)};
    }
    return error_reply(404, "not_found", "no such resource");
  }
  std::string rel = percent_decode(path.substr(1));
  if (rel.empty() || rel.back() == '/') rel += "index.html";
  const std::filesystem::path relative(rel);
  for (const auto& part : relative) {
    if (part == "..") return error_reply(403, "forbidden", "path escapes the static directory");
  }
  if (relative.is_absolute()) return error_reply(403, "forbidden", "absolute path");
  const auto full = std::filesystem::path(static_dir_) / relative;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(full, ec)) {
    return error_reply(404, "not_found", "no such resource");
  }
  std::ifstream in(full, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return {200, std::string(content_type_for(full)), buf.str()};
}

HttpReply ApiRouter::handle(std::string_view method, std::string_view target,
                            std::string_view body) const {
  const auto qpos = target.find('?');
  const std::string_view path = target.substr(0, qpos);
  const std::string_view query =
      qpos == std::string_view::npos ? std::string_view{} : target.substr(qpos + 1);

  try {
    if (path.starts_with("/api/")) {
      if (path == "/api/status" || path == "/api/config" || path == "/api/events") {
        if (method != "GET") return error_reply(405, "method_not_allowed", "use GET");
        if (path == "/api/status") return json_reply(200, ok_body(pipeline_.status()));
        if (path == "/api/config") return json_reply(200, ok_body(pipeline_.effective_config()));
        const auto q = parse_query(query);
        const auto filter = parse_event_query(query_value(q, "since"), query_value(q, "id"),
                                              query_value(q, "after"), query_value(q, "limit"));
        nlohmann::json records = nlohmann::json::array();
        for (const auto& r : pipeline_.store().query(filter)) records.push_back(to_json(r));
        return json_reply(200, ok_body(records));
      }
      if (path.starts_with("/api/control/")) {
        if (method != "POST") return error_reply(405, "method_not_allowed", "use POST");
        const auto which = path.substr(std::string_view("/api/control/").size());
        sim::ControlCommand cmd;
        if (which == "fan") {
          cmd = sim::fan_command_from_json(parse_body(body));
        } else if (which == "audio") {
          cmd = sim::audio_command_from_json(parse_body(body));
        } else if (which == "car") {
          cmd = sim::car_command_from_json(parse_body(body));
        } else {
          return error_reply(404, "not_found", "unknown control '" + std::string(which) + "'");
        }
        const auto ack = pipeline_.control(cmd);
        return json_reply(200, ok_body({{"applied_t_s", ack.applied_t_s},
                                        {"command", sim::command_to_json(cmd)}}));
      }
      return error_reply(404, "not_found", "no such endpoint");
    }
    if (method != "GET" && method != "HEAD") return error_reply(405, "method_not_allowed", "use GET");
    return serve_static(path);
  } catch (const ValidationError& e) {
    return error_reply(400, "validation", e.what());
  } catch (const ModeError& e) {
    return error_reply(409, "mode", e.what());
  } catch (const Error& e) {
    return error_reply(503, "unavailable", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal", e.what());
  }
}

namespace {

/// Stream subscribers opened by this server, detached on shutdown so the hub
/// stops posting into a dead io_context.
struct SubscriberRegistry {
  std::mutex mutex;
  std::vector<std::weak_ptr<Subscriber>> subs;

  void add(const std::shared_ptr<Subscriber>& sub) {
    std::lock_guard lock(mutex);
    std::erase_if(subs, [](const auto& w) { return w.expired(); });
    subs.push_back(sub);
  }

  void detach_all(Hub& hub) {
    std::lock_guard lock(mutex);
    for (const auto& w : subs) {
      if (auto sub = w.lock()) {
        sub->set_wakeup(nullptr);
        hub.unsubscribe(sub);
      }
    }
    subs.clear();
  }
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Pipeline& pipeline, SubscriberRegistry& registry)
      : ws_(std::move(socket)), pipeline_(pipeline), registry_(registry) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    sub_ = pipeline_.hub().subscribe(pipeline_.effective_config());
    registry_.add(sub_);
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto executor = ws_.get_executor();
    sub_->set_wakeup([weak, executor] {
      net::post(executor, [weak] {
        if (auto self = weak.lock()) self->write_next();
      });
    });
    do_read();
    write_next();
  }

  void do_read() {
    ws_.async_read(read_buf_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    read_buf_.consume(read_buf_.size());
    do_read();
  }

  void write_next() {
    if (writing_ || done_) return;
    auto msg = sub_->try_pop();
    if (!msg) {
      if (sub_->closed()) {
        done_ = true;
        ws_.async_close(websocket::close_code::policy_error,
                        [self = shared_from_this()](beast::error_code) { self->finish(); });
      }
      return;
    }
    writing_ = true;
    out_ = std::move(*msg);
    ws_.async_write(net::buffer(out_),
                    beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      finish();
      return;
    }
    write_next();
  }

  void finish() {
    done_ = true;
    if (sub_) {
      pipeline_.hub().unsubscribe(sub_);
      sub_->set_wakeup(nullptr);
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  Pipeline& pipeline_;
  SubscriberRegistry& registry_;
  beast::flat_buffer read_buf_;
  std::shared_ptr<Subscriber> sub_;
  std::string out_;
  bool writing_ = false;
  bool done_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Pipeline& pipeline, const ApiRouter& router,
              SubscriberRegistry& registry)
      : stream_(std::move(socket)), pipeline_(pipeline), router_(router), registry_(registry) {}

  void run() {
    net::dispatch(stream_.get_executor(),
                  beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    if (websocket::is_upgrade(req_)) {
      const auto target = std::string_view(req_.target().data(), req_.target().size());
      if (target.substr(0, target.find('?')) == "/api/stream") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), pipeline_, registry_)
            ->run(std::move(req_));
        return;
      }
    }
    const auto reply = router_.handle(
        std::string_view(req_.method_string().data(), req_.method_string().size()),
        std::string_view(req_.target().data(), req_.target().size()), req_.body());
    res_ = {};
    res_.version(req_.version());
    res_.result(reply.status);
    res_.set(http::field::server, "fibersense");
    res_.set(http::field::content_type, reply.content_type);
    res_.set(http::field::cache_control, "no-store");
    res_.keep_alive(req_.keep_alive());
    if (req_.method() != http::verb::head) res_.body() = reply.body;
    res_.prepare_payload();
    http::async_write(stream_, res_,
                      beast::bind_front_handler(&HttpSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (!res_.keep_alive()) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    do_read();
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  http::response<http::string_body> res_;
  Pipeline& pipeline_;
  const ApiRouter& router_;
  SubscriberRegistry& registry_;
};

}  // namespace

struct HttpServer::Impl {
  Impl(Pipeline& p, const std::string& address, std::uint16_t port, std::string static_dir,
       std::size_t threads)
      : pipeline(p),
        router(p, std::move(static_dir)),
        address(address),
        requested_port(port),
        n_threads(std::max<std::size_t>(threads, 1)),
        acceptor(net::make_strand(ioc)) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == net::error::operation_aborted) return;
      } else {
        std::make_shared<HttpSession>(std::move(socket), pipeline, router, registry)->run();
      }
      accept();
    });
  }

  Pipeline& pipeline;
  ApiRouter router;
  SubscriberRegistry registry;
  std::string address;
  std::uint16_t requested_port;
  std::size_t n_threads;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  std::uint16_t bound_port = 0;
};

HttpServer::HttpServer(Pipeline& pipeline, const std::string& address, std::uint16_t port,
                       std::string static_dir, std::size_t threads)
    : impl_(std::make_unique<Impl>(pipeline, address, port, std::move(static_dir), threads)) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  beast::error_code ec;
  const auto addr = net::ip::make_address(impl_->address, ec);
  if (ec) throw ConfigError("invalid listen address '" + impl_->address + "'");
  const tcp::endpoint endpoint(addr, impl_->requested_port);
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error("cannot listen on " + impl_->address + ":" +
                std::to_string(impl_->requested_port) + ": " + ec.message());
  }
  impl_->bound_port = impl_->acceptor.local_endpoint().port();
  impl_->accept();
  for (std::size_t i = 0; i < impl_->n_threads; ++i) {
    impl_->threads.emplace_back([this] { impl_->ioc.run(); });
  }
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->registry.detach_all(impl_->pipeline.hub());
  impl_->ioc.stop();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
  impl_->threads.clear();
}

std::uint16_t HttpServer::port() const { return impl_->bound_port; }

}  // namespace fibersense::service
