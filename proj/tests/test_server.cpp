#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"

#include "fibersense/service/pipeline.hpp"
#include "fibersense/service/server.hpp"
#include "fibersense/sim/json_io.hpp"
#include "support/scenarios.hpp"

using namespace fibersense;
using namespace fibersense::service;
using nlohmann::json;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
namespace fs = std::filesystem;

namespace {

struct Response {
  unsigned status = 0;
  std::string content_type;
  std::string body;
};

Response request(std::uint16_t port, http::verb method, const std::string& target,
                 const std::string& body = "") {
  net::io_context ioc;
  tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::string_body> req{method, target, 11};
  req.set(http::field::host, "127.0.0.1");
  if (!body.empty()) {
    req.set(http::field::content_type, "application/json");
    req.body() = body;
  }
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {res.result_int(), std::string(res[http::field::content_type]), res.body()};
}

/// Blocking stream client.
class StreamClient {
 public:
  explicit StreamClient(std::uint16_t port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1:" + std::to_string(port), "/api/stream");
  }

  json next() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }

  /// Event messages up to the end marker (see publish_end_marker).
  std::vector<json> events_until_end() {
    std::vector<json> events;
    for (;;) {
      auto m = next();
      if (m["type"] == "overflow") FAIL("stream overflowed");
      if (m["type"] == "tile" && m.contains("end_marker")) return events;
      if (m["type"] == "event") events.push_back(m);
    }
  }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

PipelineConfig three_source_config(double speed, double duration_s) {
  const auto script = scenarios::three_sources(41, 7.0, duration_s);
  const auto dir = fs::temp_directory_path() / "fibersense_test_server";
  fs::create_directories(dir);
  const auto path = dir / "three_sources.json";
  std::ofstream(path) << json(script).dump();
  PipelineConfig c;
  c.seed = script.seed;
  c.scenario_path = path.string();
  c.speed = speed;
  return c;
}

// A finished pipeline publishes nothing more, so a tile pushed through the hub
// afterwards tells the clients they have seen everything.
void publish_end_marker(Pipeline& p) {
  p.wait();
  p.hub().publish_tile(json{{"type", "tile"}, {"end_marker", true}});
}

// Event payloads without the per-connection envelope.
json strip(json event) {
  event.erase("type");
  event.erase("seq");
  return event;
}

}  // namespace

TEST_CASE("HTTP endpoints over the wire") {
  PipelineConfig config;
  config.speed = 0.0;
  config.duration_s = 3.0;
  Pipeline pipeline(config);
  HttpServer server(pipeline, "127.0.0.1", 0, "");
  server.start();
  REQUIRE(server.port() != 0);

  const auto status = request(server.port(), http::verb::get, "/api/status");
  CHECK(status.status == 200);
  CHECK(status.content_type == "application/json");
  const auto sj = json::parse(status.body);
  CHECK(sj["ok"] == true);
  CHECK(sj["data"]["state"] == "idle");

  const auto cfg = json::parse(request(server.port(), http::verb::get, "/api/config").body);
  CHECK(cfg["data"] == to_json(pipeline.config()));

  pipeline.start();
  const auto fan = request(server.port(), http::verb::post, "/api/control/fan", R"({"on":true})");
  CHECK((fan.status == 200 || fan.status == 409));
  if (fan.status == 200) CHECK(json::parse(fan.body)["data"].contains("applied_t_s"));
  const auto car = request(server.port(), http::verb::post, "/api/control/car",
                           R"({"command":"start","speed_mps":99})");
  CHECK(car.status == 400);
  CHECK(json::parse(car.body)["ok"] == false);
  CHECK(json::parse(car.body).contains("error"));
  pipeline.wait();

  const auto events = json::parse(request(server.port(), http::verb::get, "/api/events?since=0").body);
  CHECK(events["ok"] == true);
  CHECK(events["data"].is_array());

  const auto index = request(server.port(), http::verb::get, "/");
  CHECK(index.status == 200);
  CHECK(index.content_type.starts_with("text/html"));
  CHECK(request(server.port(), http::verb::get, "/api/none").status == 404);
  CHECK(request(server.port(), http::verb::put, "/api/status").status == 405);
  server.stop();
}

TEST_CASE("stream snapshot, sequence numbers and a stalled subscriber") {
  Pipeline pipeline(three_source_config(1.0, 25.0));
  HttpServer server(pipeline, "127.0.0.1", 0, "");
  server.start();

  StreamClient steady(server.port());
  StreamClient stalled(server.port());
  CHECK(steady.next()["type"] == "snapshot");
  const auto snap = stalled.next();
  CHECK(snap["type"] == "snapshot");
  CHECK(snap["config"] == to_json(pipeline.config()));
  CHECK(snap["events"] == json::array());

  pipeline.start();
  std::vector<json> steady_events;
  std::thread reader([&] { steady_events = steady.events_until_end(); });

  // Read a little, then stop reading for 10 s while events keep coming.
  while (pipeline.status()["sim_time_s"].get<double>() < 8.0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  std::this_thread::sleep_for(std::chrono::seconds(10));
  publish_end_marker(pipeline);
  auto stalled_events = stalled.events_until_end();
  reader.join();
  const auto log = pipeline.store().query();
  REQUIRE_FALSE(log.empty());

  // Both subscribers joined before the run: each saw every record, in order,
  // numbered 1, 2, ... without gaps.
  for (const auto* events : {&steady_events, &stalled_events}) {
    REQUIRE(events->size() == log.size());
    for (std::size_t i = 0; i < events->size(); ++i) {
      CHECK((*events)[i]["seq"] == i + 1);
      CHECK(strip((*events)[i]) == to_json(log[i]));
    }
  }
  server.stop();
}

TEST_CASE("subscriber joining mid-run gets the live events first") {
  Pipeline pipeline(three_source_config(2.0, 20.0));
  HttpServer server(pipeline, "127.0.0.1", 0, "");
  server.start();
  pipeline.start();
  // Sources come on at 7 s and are confirmed shortly after.
  while (pipeline.hub().live_events().size() < 3 && !pipeline.finished()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  StreamClient late(server.port());
  const auto snap = late.next();
  REQUIRE(snap["type"] == "snapshot");
  CHECK(snap["events"].size() >= 3);
  for (const auto& e : snap["events"]) CHECK(e["event"] != "ended");

  publish_end_marker(pipeline);
  const auto log = pipeline.store().query();
  const auto events = late.events_until_end();
  REQUIRE_FALSE(events.empty());
  // What follows the snapshot is a gap-free suffix of the log.
  const auto first = events.front()["sequence"].get<std::uint64_t>();
  REQUIRE(events.size() == log.size() - first + 1);
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i]["seq"] == i + 1);
    CHECK(strip(events[i]) == to_json(log[first - 1 + i]));
  }
  server.stop();
}
