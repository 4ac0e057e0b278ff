#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

namespace chunkchain::testing {

namespace net = boost::asio;
namespace beast = boost::beast;

/// Blocking HTTP GET against 127.0.0.1. Returns {status, body}.
inline std::pair<int, std::string> http_get(std::uint16_t port, const std::string &target) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(net::ip::tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  beast::http::request<beast::http::empty_body> req{beast::http::verb::get, target, 11};
  req.set(beast::http::field::host, "127.0.0.1");
  beast::http::write(stream, req);
  beast::flat_buffer buf;
  beast::http::response<beast::http::string_body> res;
  beast::http::read(stream, buf, res);
  beast::error_code ec;
  stream.socket().shutdown(net::ip::tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), res.body()};
}

/// Scripted WebSocket client; a background thread collects every frame.
class WsClient {
 public:
  explicit WsClient(std::uint16_t port) : ws_(ioc_) {
    net::ip::tcp::endpoint ep(net::ip::make_address("127.0.0.1"), port);
    beast::get_lowest_layer(ws_).connect(ep);
    ws_.handshake("127.0.0.1:" + std::to_string(port), "/ws");
    reader_ = std::thread([this] { read_loop(); });
  }

  ~WsClient() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(net::ip::tcp::socket::shutdown_both, ec);
    if (reader_.joinable()) reader_.join();
  }

  /// Sends a request and waits for the matching response frame.
  nlohmann::json request(const std::string &type, nlohmann::json body,
                         std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    const int id = ++next_id_;
    send_raw(nlohmann::json{{"req_id", id}, {"type", type}, {"body", std::move(body)}}.dump());
    auto f = wait_for([id](const nlohmann::json &j) { return j.value("req_id", nlohmann::json()) == id; }, timeout);
    return f ? *f : nlohmann::json();
  }

  void send_raw(const std::string &text) {
    std::lock_guard lock(write_mu_);
    ws_.text(true);
    ws_.write(net::buffer(text));
  }

  std::optional<nlohmann::json> wait_for(const std::function<bool(const nlohmann::json &)> &pred,
                                         std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    std::optional<nlohmann::json> hit;
    cv_.wait_for(lock, timeout, [&] {
      for (const auto &f : frames_)
        if (pred(f)) {
          hit = f;
          return true;
        }
      return closed_;
    });
    return hit;
  }

  std::vector<nlohmann::json> frames() {
    std::lock_guard lock(mu_);
    return frames_;
  }

 private:
  void read_loop() {
    for (;;) {
      beast::flat_buffer buf;
      beast::error_code ec;
      ws_.read(buf, ec);
      std::lock_guard lock(mu_);
      if (ec) {
        closed_ = true;
        cv_.notify_all();
        return;
      }
      frames_.push_back(nlohmann::json::parse(beast::buffers_to_string(buf.data()), nullptr, false));
      cv_.notify_all();
    }
  }

  net::io_context ioc_;
  beast::websocket::stream<beast::tcp_stream> ws_;
  std::thread reader_;
  std::mutex write_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<nlohmann::json> frames_;
  bool closed_ = false;
  int next_id_ = 0;
};

}  // namespace chunkchain::testing
