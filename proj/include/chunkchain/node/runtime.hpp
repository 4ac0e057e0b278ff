#pragma once

#include <ifaddrs.h>
#include <net/if.h>
#include <netinet/in.h>
#include <arpa/inet.h>

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "chunkchain/node/config.hpp"
#include "chunkchain/node/core.hpp"

namespace chunkchain::node {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using udp = asio::ip::udp;

class RuntimeError : public Error {
 public:
  using Error::Error;
};

inline std::int64_t wall_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

/// First up, non-loopback IPv4 address, or 127.0.0.1 when there is none.
inline std::string first_lan_ipv4() {
  ifaddrs *list = nullptr;
  std::string found = "127.0.0.1";
  if (getifaddrs(&list) != 0) return found;
  for (auto *i = list; i; i = i->ifa_next) {
    if (!i->ifa_addr || i->ifa_addr->sa_family != AF_INET) continue;
    if (!(i->ifa_flags & IFF_UP) || (i->ifa_flags & IFF_LOOPBACK)) continue;
    char buf[INET_ADDRSTRLEN];
    auto *sin = reinterpret_cast<sockaddr_in *>(i->ifa_addr);
    if (inet_ntop(AF_INET, &sin->sin_addr, buf, sizeof buf)) {
      found = buf;
      break;
    }
  }
  freeifaddrs(list);
  return found;
}

inline std::pair<std::string, std::string> split_host_port(const std::string &address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
    throw RuntimeError("peer address \"" + address + "\" must look like host:port");
  return {address.substr(0, colon), address.substr(colon + 1)};
}

inline std::string read_text_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline missions::MissionPack pack_for(const NodeConfig &c) {
  return c.mission_pack_path ? missions::load_mission_pack(read_text_file(*c.mission_pack_path)) : missions::default_pack();
}

inline std::string_view content_type_for(const std::filesystem::path &p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

inline constexpr const char *kBuiltinPage = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>chunkchain</title></head>
<body><h1>chunkchain node</h1>
<p>No UI bundle is configured. Start the node with <code>--serve-ui DIR</code> to serve one.</p>
<p>Clients speak JSON over the WebSocket endpoint <code>/ws</code>.</p>
</body></html>
)html";

/// Networked host for one NodeCore. All core calls run on the io_context
/// thread that executes run(), which keeps the core single-writer.
class Runtime {
 public:
  explicit Runtime(NodeConfig config, std::chrono::milliseconds tick = std::chrono::milliseconds(250))
      : cfg_(std::move(config)), tick_every_(tick), timer_(ioc_), peer_acceptor_(ioc_), api_acceptor_(ioc_), udp_(ioc_) {
    validate(cfg_);
    spdlog::set_level(spdlog::level::from_str(cfg_.log_level));
    pack_ = pack_for(cfg_);
    key_ = crypto::derive_classroom_key(cfg_.classroom_passphrase, cfg_.classroom_name);
  }

  Runtime(const Runtime &) = delete;
  Runtime &operator=(const Runtime &) = delete;
  ~Runtime() { ioc_.stop(); }

  /// Binds every listener. Throws RuntimeError with a remedy when a port is taken.
  void start() {
    const auto bind = asio::ip::make_address(cfg_.bind_address);
    listen(peer_acceptor_, {bind, cfg_.listen_tcp}, "listen_tcp", "--listen-tcp");
    listen(api_acceptor_, {bind, cfg_.client_api}, "client_api", "--client-api");
    const std::string host = cfg_.advertise_host.empty() ? first_lan_ipv4() : cfg_.advertise_host;
    self_id_ = host + ":" + std::to_string(peer_port());

    CoreOptions o;
    o.self_id = self_id_;
    o.classroom_name = cfg_.classroom_name;
    o.key = key_;
    o.difficulty = cfg_.difficulty;
    o.auto_mine_interval_ms = cfg_.auto_mine_interval_ms;
    o.pack = pack_;
    o.miner_nick = "teacher";
    o.discovery = cfg_.discovery;
    core_.emplace(std::move(o), wall_ms());

    if (cfg_.discovery) open_discovery();
    accept_peers();
    accept_clients();
    for (const auto &p : cfg_.static_peers) apply(core_->connect(p, wall_ms()));
    schedule_tick();
    spdlog::info("node {} serving clients on port {}", self_id_, api_port());
  }

  /// Blocks until stop() or an interrupt signal.
  void run() { ioc_.run(); }

  void stop() {
    asio::post(ioc_, [this] { shutdown(); });
  }

  void stop_on_signals() {
    signals_ = std::make_unique<asio::signal_set>(ioc_, SIGINT, SIGTERM);
    signals_->async_wait([this](const boost::system::error_code &ec, int) {
      if (!ec) shutdown();
    });
  }

  std::uint16_t peer_port() const { return peer_acceptor_.local_endpoint().port(); }
  std::uint16_t api_port() const { return api_acceptor_.local_endpoint().port(); }
  const std::string &self_id() const { return self_id_; }

  /// Runs `f(core)` on the io thread and waits for the result.
  template <class F>
  auto call(F f) {
    using R = decltype(f(std::declval<NodeCore &>()));
    std::packaged_task<R()> task([this, f = std::move(f)]() mutable { return f(*core_); });
    auto fut = task.get_future();
    asio::post(ioc_, [&task] { task(); });
    return fut.get();
  }

  /// Mines the mempool into a block now and gossips it.
  void mine_now() {
    call([this](NodeCore &core) {
      apply(core.mine_now(wall_ms()));
      return 0;
    });
  }

 private:
  struct Closable {
    virtual ~Closable() = default;
    virtual void close() = 0;
  };

  class PeerLink;
  class PeerReader;
  class HttpSession;
  class WsSession;

  void listen(tcp::acceptor &a, tcp::endpoint ep, const std::string &field, const std::string &flag) {
    boost::system::error_code ec;
    a.open(ep.protocol(), ec);
    if (!ec) a.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) a.bind(ep, ec);
    if (!ec) a.listen(asio::socket_base::max_listen_connections, ec);
    if (ec == asio::error::address_in_use)
      throw RuntimeError("port " + std::to_string(ep.port()) + " (" + field +
                         ") is already in use; stop the other process or choose another port with " + flag);
    if (ec) throw RuntimeError("cannot listen on " + ep.address().to_string() + ":" + std::to_string(ep.port()) + ": " + ec.message());
  }

  void track(const std::shared_ptr<Closable> &c) {
    std::erase_if(open_, [](const auto &w) { return w.expired(); });
    open_.push_back(c);
  }

  void shutdown() {
    if (stopping_) return;
    stopping_ = true;
    boost::system::error_code ec;
    timer_.cancel();
    peer_acceptor_.close(ec);
    api_acceptor_.close(ec);
    udp_.close(ec);
    if (signals_) signals_->cancel(ec);
    for (auto &w : open_)
      if (auto c = w.lock()) c->close();
    open_.clear();
    links_.clear();
    clients_.clear();
    ioc_.stop();
  }

  void schedule_tick() {
    timer_.expires_after(tick_every_);
    timer_.async_wait([this](const boost::system::error_code &ec) {
      if (ec || stopping_) return;
      const auto now = wall_ms();
      apply(core_->tick(now));
      if (now - last_redial_ >= 5000) {
        last_redial_ = now;
        for (const auto &p : cfg_.static_peers)
          if (!core_->peers().peers.contains(p)) apply(core_->connect(p, now));
      }
      schedule_tick();
    });
  }

  void apply(Effects fx) {
    for (auto &f : fx.to_clients) {
      auto it = clients_.find(f.connection);
      if (it == clients_.end()) continue;
      if (auto ws = it->second.lock()) send_ws(*ws, f.frame.dump());
    }
    for (auto &o : fx.to_peers) send_peer(o.to, p2p::encode_frame(o.message));
    if (fx.beacon && udp_.is_open()) {
      auto text = std::make_shared<std::string>(p2p::encode_beacon(*fx.beacon));
      udp::endpoint to(asio::ip::address_v4::broadcast(), p2p::kDiscoveryPort);
      udp_.async_send_to(asio::buffer(*text), to, [text](const boost::system::error_code &, std::size_t) {});
    }
    for (const auto &b : fx.mined) spdlog::info("mined block {} with {} transactions", b.header.index, b.transactions.size());
  }

  void open_discovery() {
    boost::system::error_code ec;
    udp_.open(udp::v4(), ec);
    if (!ec) udp_.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) udp_.set_option(asio::socket_base::broadcast(true), ec);
    if (!ec) udp_.bind({asio::ip::address_v4::any(), p2p::kDiscoveryPort}, ec);
    if (ec) {
      spdlog::warn("discovery disabled: {}", ec.message());
      udp_.close(ec);
      return;
    }
    receive_beacon();
  }

  void receive_beacon() {
    udp_.async_receive_from(asio::buffer(beacon_buf_), beacon_from_, [this](const boost::system::error_code &ec, std::size_t n) {
      if (ec) return;
      if (auto b = p2p::parse_beacon(std::string_view(beacon_buf_.data(), n))) apply(core_->handle_beacon(*b, wall_ms()));
      receive_beacon();
    });
  }

  void accept_peers();
  void accept_clients();
  void send_peer(const std::string &address, std::string frame);
  void send_ws(WsSession &ws, std::string text);
  void on_client_open(const std::shared_ptr<WsSession> &ws);
  void on_client_close(const std::string &id);
  void on_client_text(const std::string &id, std::string_view text) { apply(core_->handle_client(id, text, wall_ms())); }
  void on_peer_frame(std::string_view payload) { apply(core_->handle_peer_frame(payload, wall_ms())); }
  http::response<http::string_body> respond(const http::request<http::string_body> &req);

  NodeConfig cfg_;
  std::chrono::milliseconds tick_every_;
  missions::MissionPack pack_;
  crypto::ClassroomKey key_;
  std::string self_id_;
  std::optional<NodeCore> core_;

  asio::io_context ioc_;
  asio::steady_timer timer_;
  tcp::acceptor peer_acceptor_;
  tcp::acceptor api_acceptor_;
  udp::socket udp_;
  std::unique_ptr<asio::signal_set> signals_;
  std::array<char, 2048> beacon_buf_{};
  udp::endpoint beacon_from_;
  std::int64_t last_redial_ = 0;
  bool stopping_ = false;
  std::uint64_t next_client_ = 0;

  std::vector<std::weak_ptr<Closable>> open_;
  std::map<std::string, std::shared_ptr<PeerLink>> links_;
  std::map<std::string, std::weak_ptr<WsSession>> clients_;
};

/// Outbound peer connection: dialled on first use, write-only.
class Runtime::PeerLink : public Runtime::Closable, public std::enable_shared_from_this<PeerLink> {
 public:
  PeerLink(Runtime &rt, std::string address) : rt_(rt), address_(std::move(address)), socket_(rt.ioc_), resolver_(rt.ioc_) {}

  void start() {
    std::pair<std::string, std::string> hp;
    try {
      hp = split_host_port(address_);
    } catch (const RuntimeError &e) {
      spdlog::warn("{}", e.what());
      return fail();
    }
    resolver_.async_resolve(hp.first, hp.second, [self = shared_from_this()](auto ec, tcp::resolver::results_type r) {
      if (ec) return self->fail();
      asio::async_connect(self->socket_, r, [self](auto ec, const tcp::endpoint &) {
        if (ec) return self->fail();
        self->connected_ = true;
        self->watch();
        self->write_next();
      });
    });
  }

  void send(std::string frame) {
    if (dead_) return;
    if (queue_.size() >= 4096) queue_.pop_front();
    queue_.push_back(std::move(frame));
    if (connected_ && !writing_) write_next();
  }

  void close() override {
    dead_ = true;
    boost::system::error_code ec;
    socket_.close(ec);
  }

 private:
  void write_next() {
    if (queue_.empty() || dead_) {
      writing_ = false;
      return;
    }
    writing_ = true;
    asio::async_write(socket_, asio::buffer(queue_.front()), [self = shared_from_this()](auto ec, std::size_t) {
      if (ec) return self->fail();
      self->queue_.pop_front();
      self->write_next();
    });
  }

  // The remote never writes on this connection, so any completion means it closed.
  void watch() {
    socket_.async_read_some(asio::buffer(sink_), [self = shared_from_this()](auto ec, std::size_t) {
      if (ec) return self->fail();
      self->watch();
    });
  }

  void fail() {
    if (dead_) return;
    close();
    auto it = rt_.links_.find(address_);
    if (it != rt_.links_.end() && it->second.get() == this) rt_.links_.erase(it);
  }

  Runtime &rt_;
  std::string address_;
  tcp::socket socket_;
  tcp::resolver resolver_;
  std::deque<std::string> queue_;
  std::array<char, 64> sink_{};
  bool connected_ = false;
  bool writing_ = false;
  bool dead_ = false;
};

/// Inbound peer connection: read-only stream of length-prefixed frames.
class Runtime::PeerReader : public Runtime::Closable, public std::enable_shared_from_this<PeerReader> {
 public:
  PeerReader(Runtime &rt, tcp::socket s) : rt_(rt), socket_(std::move(s)) {}

  void start() { read(); }

  void close() override {
    boost::system::error_code ec;
    socket_.close(ec);
  }

 private:
  void read() {
    socket_.async_read_some(asio::buffer(buf_), [self = shared_from_this()](auto ec, std::size_t n) {
      if (ec) return;
      self->decoder_.feed(std::string_view(self->buf_.data(), n));
      try {
        while (auto frame = self->decoder_.next()) self->rt_.on_peer_frame(*frame);
      } catch (const DecodeError &e) {
        spdlog::warn("dropping peer connection: {}", e.what());
        return self->close();
      }
      self->read();
    });
  }

  Runtime &rt_;
  tcp::socket socket_;
  p2p::FrameDecoder decoder_;
  std::array<char, 16384> buf_{};
};

class Runtime::WsSession : public Runtime::Closable, public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(Runtime &rt, tcp::socket s, std::string id) : rt_(rt), ws_(std::move(s)), id_(std::move(id)) {}

  const std::string &id() const { return id_; }

  void accept(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(64 * 1024);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->rt_.on_client_open(self);
      self->read();
    });
  }

  void send(std::string text) {
    if (closed_) return;
    out_.push_back(std::move(text));
    if (!writing_) write_next();
  }

  void close() override {
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->rt_.on_client_close(self->id_);
        return;
      }
      auto text = beast::buffers_to_string(self->buf_.data());
      self->buf_.consume(self->buf_.size());
      self->rt_.on_client_text(self->id_, text);
      self->read();
    });
  }

  void write_next() {
    if (out_.empty() || closed_) {
      writing_ = false;
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->out_.pop_front();
      self->write_next();
    });
  }

  Runtime &rt_;
  websocket::stream<beast::tcp_stream> ws_;
  std::string id_;
  beast::flat_buffer buf_;
  std::deque<std::string> out_;
  bool writing_ = false;
  bool closed_ = false;
};

class Runtime::HttpSession : public Runtime::Closable, public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(Runtime &rt, tcp::socket s) : rt_(rt), stream_(std::move(s)) {}

  void start() { read(); }

  void close() override {
    beast::error_code ec;
    stream_.socket().close(ec);
  }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->handle();
    });
  }

  void handle() {
    if (websocket::is_upgrade(req_) && req_.target() == "/ws") {
      stream_.expires_never();
      auto ws = std::make_shared<WsSession>(rt_, stream_.release_socket(), "ws-" + std::to_string(++rt_.next_client_));
      rt_.track(ws);
      ws->accept(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(rt_.respond(req_));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || res->need_eof()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  Runtime &rt_;
  beast::tcp_stream stream_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
};

inline void Runtime::accept_peers() {
  peer_acceptor_.async_accept([this](const boost::system::error_code &ec, tcp::socket s) {
    if (ec) return;
    auto r = std::make_shared<PeerReader>(*this, std::move(s));
    track(r);
    r->start();
    accept_peers();
  });
}

inline void Runtime::accept_clients() {
  api_acceptor_.async_accept([this](const boost::system::error_code &ec, tcp::socket s) {
    if (ec) return;
    auto h = std::make_shared<HttpSession>(*this, std::move(s));
    track(h);
    h->start();
    accept_clients();
  });
}

inline void Runtime::send_peer(const std::string &address, std::string frame) {
  auto &link = links_[address];
  if (!link) {
    link = std::make_shared<PeerLink>(*this, address);
    track(link);
    auto l = link;
    l->send(std::move(frame));
    l->start();
    return;
  }
  link->send(std::move(frame));
}

inline void Runtime::send_ws(WsSession &ws, std::string text) { ws.send(std::move(text)); }

inline void Runtime::on_client_open(const std::shared_ptr<WsSession> &ws) {
  clients_[ws->id()] = ws;
  core_->open_connection(ws->id());
}

inline void Runtime::on_client_close(const std::string &id) {
  clients_.erase(id);
  core_->close_connection(id);
}

inline http::response<http::string_body> Runtime::respond(const http::request<http::string_body> &req) {
  http::response<http::string_body> res{http::status::ok, req.version()};
  res.keep_alive(req.keep_alive());
  auto reply = [&](http::status s, std::string_view type, std::string body) {
    res.result(s);
    res.set(http::field::content_type, beast::string_view(type.data(), type.size()));
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };
  if (req.method() != http::verb::get && req.method() != http::verb::head)
    return reply(http::status::method_not_allowed, "text/plain", "method not allowed\n");
  std::string target(req.target());
  if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
  if (target == "/healthz") return reply(http::status::ok, "text/plain", "ok");
  if (target == "/status") return reply(http::status::ok, "application/json", core_->status(wall_ms()).dump());
  if (!cfg_.serve_ui_path) {
    if (target == "/" || target == "/index.html") return reply(http::status::ok, "text/html; charset=utf-8", kBuiltinPage);
    return reply(http::status::not_found, "text/plain", "not found\n");
  }
  if (target == "/") target = "/index.html";
  const std::filesystem::path rel = std::filesystem::path(target.substr(1)).lexically_normal();
  if (rel.empty() || rel.is_absolute() || *rel.begin() == "..")
    return reply(http::status::not_found, "text/plain", "not found\n");
  const auto file = std::filesystem::path(*cfg_.serve_ui_path) / rel;
  std::error_code fec;
  if (!std::filesystem::is_regular_file(file, fec)) return reply(http::status::not_found, "text/plain", "not found\n");
  return reply(http::status::ok, content_type_for(file), read_text_file(file.string()));
}

}  // namespace chunkchain::node
