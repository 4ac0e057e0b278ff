#pragma once

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "chunkchain/node/core.hpp"

namespace chunkchain::testing {

inline const crypto::ClassroomKey &classroom_key(const std::string &passphrase = "correct horse") {
  static std::map<std::string, crypto::ClassroomKey> cache;
  auto it = cache.find(passphrase);
  if (it == cache.end())
    it = cache.emplace(passphrase, crypto::derive_classroom_key(passphrase, "demo", crypto::KdfCost::minimal)).first;
  return it->second;
}

inline node::CoreOptions core_options(const std::string &id, const std::string &passphrase = "correct horse") {
  node::CoreOptions o;
  o.self_id = id;
  o.classroom_name = "demo";
  o.key = classroom_key(passphrase);
  o.difficulty = 4;
  o.auto_mine_interval_ms = 0;
  o.pack = missions::default_pack();
  o.miner_nick = id;
  return o;
}

/// In-memory wiring of several cores with instant, lossless delivery.
struct Cluster {
  std::map<std::string, std::unique_ptr<node::NodeCore>> nodes;
  std::deque<p2p::Outbound> wire;
  std::vector<node::ClientFrame> client_frames;  // every frame any core sent to a client

  node::NodeCore &add(const std::string &id, const std::string &passphrase = "correct horse") {
    auto &slot = nodes[id];
    slot = std::make_unique<node::NodeCore>(core_options(id, passphrase), 0);
    return *slot;
  }

  void take(node::Effects fx) {
    for (auto &o : fx.to_peers) wire.push_back(std::move(o));
    for (auto &f : fx.to_clients) client_frames.push_back(std::move(f));
  }

  void pump(std::int64_t now) {
    while (!wire.empty()) {
      auto o = std::move(wire.front());
      wire.pop_front();
      auto it = nodes.find(o.to);
      if (it != nodes.end()) take(it->second->handle_peer(o.message, now));
    }
  }

  void connect_all(std::int64_t now) {
    for (auto &[a, core] : nodes)
      for (auto &[b, other] : nodes)
        if (a < b) take(core->connect(b, now));
    pump(now);
  }

  /// Sends a client request and returns the direct response frame.
  nlohmann::json request(const std::string &node_id, const std::string &connection, const std::string &type,
                         nlohmann::json body, std::int64_t now) {
    static int req = 0;
    const int id = ++req;
    auto fx = nodes.at(node_id)->handle_client(connection, nlohmann::json{{"req_id", id}, {"type", type}, {"body", body}},
                                               now);
    nlohmann::json response;
    for (const auto &f : fx.to_clients)
      if (f.connection == connection && f.frame.value("req_id", nlohmann::json()) == id) response = f.frame;
    take(std::move(fx));
    pump(now);
    return response;
  }
};

}  // namespace chunkchain::testing
