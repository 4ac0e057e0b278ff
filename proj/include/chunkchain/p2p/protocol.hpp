#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chunkchain/ledger/chain.hpp"
#include "chunkchain/p2p/message.hpp"

namespace chunkchain::p2p {

constexpr std::size_t kSeenCapacity = 4096;
constexpr std::int64_t kPeerTimeoutMs = 30'000;
constexpr std::int64_t kBeaconIntervalMs = 5'000;
constexpr std::int64_t kPingIntervalMs = 10'000;
constexpr std::int64_t kSyncTimeoutMs = 5'000;
constexpr int kMaxStrikes = 3;

/// Bounded recently-seen id set with FIFO eviction.
class SeenCache {
 public:
  explicit SeenCache(std::size_t capacity = kSeenCapacity) : capacity_(capacity) {}

  bool contains(const Digest &id) const { return members_.contains(id); }

  /// Returns false if the id was already present.
  bool insert(const Digest &id) {
    if (!members_.insert(id).second) return false;
    order_.push_back(id);
    if (order_.size() > capacity_) {
      members_.erase(order_.front());
      order_.pop_front();
    }
    return true;
  }

  std::size_t size() const { return order_.size(); }
  std::size_t capacity() const { return capacity_; }

  friend bool operator==(const SeenCache &a, const SeenCache &b) { return a.order_ == b.order_; }

 private:
  std::size_t capacity_;
  std::deque<Digest> order_;
  std::set<Digest> members_;
};

struct PeerInfo {
  std::int64_t last_seen = 0;
  std::uint64_t tip_index = 0;
  int strikes = 0;

  friend bool operator==(const PeerInfo &, const PeerInfo &) = default;
};

struct PendingSync {
  std::string peer;
  std::uint64_t to_index = 0;
  std::map<std::uint64_t, Block> collected;
  std::int64_t requested_at = 0;

  friend bool operator==(const PendingSync &, const PendingSync &) = default;
};

struct PeerState {
  std::string self_id;
  std::string classroom_name;
  std::map<std::string, PeerInfo> peers;
  SeenCache seen_tx;
  SeenCache seen_block;
  std::optional<PendingSync> pending_sync;
  std::set<std::string> greeted;  // addresses we already sent HELLO to
  std::int64_t last_beacon = std::numeric_limits<std::int64_t>::min();
  std::int64_t last_ping = 0;

  friend bool operator==(const PeerState &, const PeerState &) = default;
};

inline PeerState make_peer_state(std::string self_id, std::string classroom_name) {
  PeerState s;
  s.self_id = std::move(self_id);
  s.classroom_name = std::move(classroom_name);
  return s;
}

struct Outbound {
  std::string to;
  PeerMessage message;
};

struct Step {
  ChainState chain;
  PeerState peers;
  std::vector<Outbound> outbound;
};

namespace detail {

class Machine {
 public:
  Machine(ChainState chain, PeerState peers, std::int64_t now)
      : chain_(std::move(chain)), peers_(std::move(peers)), now_(now) {}

  Step finish() && { return {std::move(chain_), std::move(peers_), std::move(out_)}; }

  void on_message(const PeerMessage &m) {
    const auto &from = m.sender_id;
    if (from == peers_.self_id) return;
    if (auto it = peers_.peers.find(from); it != peers_.peers.end()) it->second.last_seen = now_;

    switch (m.type) {
      case MessageType::hello:
        if (auto *h = std::get_if<Hello>(&m.body)) return on_hello(from, *h);
        break;
      case MessageType::peers:
        if (auto *p = std::get_if<PeerList>(&m.body)) return on_peer_list(from, *p);
        break;
      default:
        // Genesis isolation: only admitted peers may gossip or sync.
        if (!peers_.peers.contains(from)) return;
        if (auto *tx = std::get_if<Transaction>(&m.body); tx && m.type == MessageType::tx_gossip)
          return on_tx(from, *tx);
        if (auto *b = std::get_if<Block>(&m.body); b && m.type == MessageType::block_gossip)
          return on_block(from, *b);
        if (auto *r = std::get_if<ChainRequest>(&m.body); r && m.type == MessageType::chain_request)
          return on_chain_request(from, *r);
        if (auto *r = std::get_if<ChainResponse>(&m.body); r && m.type == MessageType::chain_response)
          return on_chain_response(from, *r);
        if (auto *s = std::get_if<TipStatus>(&m.body)) {
          if (m.type == MessageType::ping) {
            send(from, {MessageType::pong, peers_.self_id, tip_status()});
            return on_tip_status(from, *s);
          }
          if (m.type == MessageType::pong) return on_tip_status(from, *s);
        }
        break;
    }
    strike(from);
  }

  void strike(const std::string &peer) {
    auto it = peers_.peers.find(peer);
    if (it == peers_.peers.end()) return;
    if (++it->second.strikes >= kMaxStrikes) evict(peer);
  }

  void tick() {
    for (auto it = peers_.peers.begin(); it != peers_.peers.end();) {
      if (now_ - it->second.last_seen > kPeerTimeoutMs) {
        peers_.greeted.erase(it->first);
        it = peers_.peers.erase(it);
      } else {
        ++it;
      }
    }
    if (peers_.pending_sync && now_ - peers_.pending_sync->requested_at > kSyncTimeoutMs) peers_.pending_sync.reset();
    if (now_ - peers_.last_ping >= kPingIntervalMs) {
      peers_.last_ping = now_;
      broadcast({MessageType::ping, peers_.self_id, tip_status()}, "");
    }
  }

  void on_beacon(const Beacon &b) {
    if (b.classroom_name != peers_.classroom_name || b.address == peers_.self_id) return;
    if (peers_.greeted.contains(b.address)) return;
    greet(b.address);
  }

  void greet(const std::string &address) {
    peers_.greeted.insert(address);
    send(address, make_hello(peers_.self_id, {peers_.classroom_name, chain_.genesis_hash(), chain_.tip_index()}));
  }

  /// Locally produced transaction or block: record as seen and gossip.
  void announce_tx(const Transaction &tx) {
    peers_.seen_tx.insert(tx.id);
    broadcast({MessageType::tx_gossip, peers_.self_id, tx}, "");
  }
  void announce_block(const Block &b) {
    peers_.seen_block.insert(block_hash(b));
    broadcast({MessageType::block_gossip, peers_.self_id, b}, "");
  }

 private:
  void send(const std::string &to, PeerMessage m) { out_.push_back({to, std::move(m)}); }

  void broadcast(const PeerMessage &m, const std::string &except) {
    for (const auto &[addr, info] : peers_.peers)
      if (addr != except) send(addr, m);
  }

  void evict(const std::string &peer) {
    peers_.peers.erase(peer);
    peers_.greeted.erase(peer);
    if (peers_.pending_sync && peers_.pending_sync->peer == peer) peers_.pending_sync.reset();
  }

  TipStatus tip_status() const { return {chain_.tip_index(), chain_.tip_hash()}; }

  void admit(const std::string &from, std::uint64_t tip_index) {
    auto &info = peers_.peers[from];
    info.last_seen = now_;
    info.tip_index = tip_index;
  }

  void on_hello(const std::string &from, const Hello &h) {
    if (h.classroom_name != peers_.classroom_name || h.genesis_hash != chain_.genesis_hash()) {
      evict(from);
      return;
    }
    admit(from, h.tip_index);
    PeerList reply{chain_.genesis_hash(), chain_.tip_index(), {}};
    for (const auto &[addr, info] : peers_.peers)
      if (addr != from) reply.addresses.push_back(addr);
    send(from, {MessageType::peers, peers_.self_id, std::move(reply)});
    if (h.tip_index > chain_.tip_index()) request_sync(from, chain_.tip_index() + 1, h.tip_index);
  }

  void on_peer_list(const std::string &from, const PeerList &p) {
    if (p.genesis_hash != chain_.genesis_hash()) {
      evict(from);
      return;
    }
    admit(from, p.tip_index);
    for (const auto &addr : p.addresses)
      if (addr != peers_.self_id && !peers_.peers.contains(addr) && !peers_.greeted.contains(addr)) greet(addr);
    if (p.tip_index > chain_.tip_index()) request_sync(from, chain_.tip_index() + 1, p.tip_index);
  }

  void on_tx(const std::string &from, const Transaction &tx) {
    if (!peers_.seen_tx.insert(tx.id)) return;
    if (!verify_transaction(tx)) return strike(from);
    if (chain_.knows(tx.id)) return;
    chain_ = mempool_add(std::move(chain_), tx);
    broadcast({MessageType::tx_gossip, peers_.self_id, tx}, from);
  }

  void on_block(const std::string &from, const Block &b) {
    auto hash = block_hash(b);
    if (!peers_.seen_block.insert(hash)) return;
    auto &info = peers_.peers[from];
    info.tip_index = std::max(info.tip_index, b.header.index);

    const auto tip = chain_.tip_index();
    const auto index = b.header.index;
    if (index == tip + 1 && b.header.prev_hash == chain_.tip_hash()) {
      auto outcome = select_chain(chain_, std::span<const Block>(&b, 1));
      if (outcome.adopted) {
        chain_ = std::move(outcome.state);
        broadcast({MessageType::block_gossip, peers_.self_id, b}, from);
      } else if (outcome.violation) {
        strike(from);
      }
      return;
    }
    if (index > tip + 1) return request_sync(from, tip + 1, index);
    // Competing block at the tip's height or one above a different parent.
    if (index == tip + 1 || (index == tip && hash < chain_.tip_hash()))
      request_sync(from, index > kSyncPageSize ? index - kSyncPageSize + 1 : 1, index);
  }

  void on_chain_request(const std::string &from, const ChainRequest &r) {
    ChainResponse resp;
    for (auto i = r.from_index; i <= r.to_index && i <= chain_.tip_index() && resp.blocks.size() < kSyncPageSize; ++i)
      resp.blocks.push_back(chain_.blocks[static_cast<std::size_t>(i)]);
    send(from, {MessageType::chain_response, peers_.self_id, std::move(resp)});
  }

  void on_tip_status(const std::string &from, const TipStatus &s) {
    peers_.peers[from].tip_index = s.tip_index;
    if (peers_.pending_sync) return;
    const auto tip = chain_.tip_index();
    if (s.tip_index > tip) {
      request_sync(from, tip + 1, s.tip_index);
    } else if (s.tip_index == tip && s.tip_hash < chain_.tip_hash() && tip > 0) {
      request_sync(from, tip > kSyncPageSize ? tip - kSyncPageSize + 1 : 1, tip);
    }
  }

  void request_sync(const std::string &peer, std::uint64_t from_index, std::uint64_t to_index) {
    if (!peers_.pending_sync || peers_.pending_sync->peer != peer) {
      peers_.pending_sync = PendingSync{peer, to_index, {}, now_};
    } else {
      peers_.pending_sync->to_index = std::max(peers_.pending_sync->to_index, to_index);
      peers_.pending_sync->requested_at = now_;
    }
    send(peer, {MessageType::chain_request, peers_.self_id, ChainRequest{from_index, to_index}});
  }

  void on_chain_response(const std::string &from, const ChainResponse &r) {
    auto &pending = peers_.pending_sync;
    if (r.blocks.empty()) {
      if (pending && pending->peer == from) pending.reset();
      return;
    }
    if (!pending || pending->peer != from)
      pending = PendingSync{from, r.blocks.back().header.index, {}, now_};
    for (const auto &b : r.blocks) pending->collected.insert_or_assign(b.header.index, b);
    pending->to_index = std::max(pending->to_index, r.blocks.back().header.index);

    // Contiguous run from the lowest collected index.
    std::vector<Block> run;
    for (const auto &[index, block] : pending->collected) {
      if (!run.empty() && index != run.back().header.index + 1) break;
      run.push_back(block);
    }
    const auto lo = run.front().header.index;
    const auto hi = run.back().header.index;
    const auto tip = chain_.tip_index();

    if (lo > 0 && lo - 1 > tip) {
      send(from, {MessageType::chain_request, peers_.self_id, ChainRequest{tip + 1, lo - 1}});
      pending->requested_at = now_;
      return;
    }
    bool attached = lo == 0 || block_hash(chain_.blocks[static_cast<std::size_t>(lo - 1)]) == run.front().header.prev_hash;
    if (!attached) {
      if (lo <= 1) {
        pending.reset();
        return strike(from);
      }
      auto back = lo - 1 > kSyncPageSize ? lo - kSyncPageSize : 1;
      send(from, {MessageType::chain_request, peers_.self_id, ChainRequest{back, lo - 1}});
      pending->requested_at = now_;
      return;
    }
    if (hi < pending->to_index && r.blocks.size() == kSyncPageSize) {
      send(from, {MessageType::chain_request, peers_.self_id, ChainRequest{hi + 1, pending->to_index}});
      pending->requested_at = now_;
      return;
    }
    pending.reset();
    auto outcome = select_chain(chain_, run);
    if (outcome.adopted) {
      chain_ = std::move(outcome.state);
      const auto &tip_block = chain_.tip();
      peers_.seen_block.insert(block_hash(tip_block));
      broadcast({MessageType::block_gossip, peers_.self_id, tip_block}, from);
    } else if (outcome.violation) {
      strike(from);
    }
  }

  ChainState chain_;
  PeerState peers_;
  std::int64_t now_;
  std::vector<Outbound> out_;
};

}  // namespace detail

/// Pure protocol transition for one received message.
inline Step handle_message(ChainState chain, PeerState peers, const PeerMessage &msg, std::int64_t now) {
  detail::Machine m(std::move(chain), std::move(peers), now);
  m.on_message(msg);
  return std::move(m).finish();
}

/// Decodes and handles a raw frame. Undecodable input is dropped and counts
/// as a strike against the sender (the declared sender_id if readable,
/// otherwise `connection_peer`).
inline Step handle_frame(ChainState chain, PeerState peers, std::string_view text, std::int64_t now,
                         const std::string &connection_peer = {}) {
  try {
    auto msg = parse_message(text);
    return handle_message(std::move(chain), std::move(peers), msg, now);
  } catch (const DecodeError &) {
    std::string culprit = connection_peer;
    try {
      auto j = json::parse(text);
      if (j.is_object() && j.contains("sender_id") && j["sender_id"].is_string())
        culprit = j["sender_id"].get<std::string>();
    } catch (const json::exception &) {
    }
    detail::Machine m(std::move(chain), std::move(peers), now);
    if (!culprit.empty()) m.strike(culprit);
    return std::move(m).finish();
  }
}

/// Evicts silent peers, expires a stalled sync, and sends periodic PINGs.
inline Step tick(ChainState chain, PeerState peers, std::int64_t now) {
  detail::Machine m(std::move(chain), std::move(peers), now);
  m.tick();
  return std::move(m).finish();
}

struct DiscoveryConfig {
  bool enabled = true;
  std::string listen_address;
};

/// The beacon to broadcast now, if one is due.
inline std::optional<Beacon> discovery_tick(PeerState &peers, const DiscoveryConfig &config, std::int64_t now) {
  if (!config.enabled) return std::nullopt;
  if (peers.last_beacon != std::numeric_limits<std::int64_t>::min() && now - peers.last_beacon < kBeaconIntervalMs)
    return std::nullopt;
  peers.last_beacon = now;
  return Beacon{peers.classroom_name, config.listen_address.empty() ? peers.self_id : config.listen_address};
}

/// Hearing a beacon: HELLO to same-classroom addresses not yet greeted.
inline Step handle_beacon(ChainState chain, PeerState peers, const Beacon &beacon, std::int64_t now) {
  detail::Machine m(std::move(chain), std::move(peers), now);
  m.on_beacon(beacon);
  return std::move(m).finish();
}

/// HELLO to a configured static peer.
inline Step connect_to(ChainState chain, PeerState peers, const std::string &address, std::int64_t now) {
  const bool self = address == peers.self_id;
  detail::Machine m(std::move(chain), std::move(peers), now);
  if (!self) m.greet(address);
  return std::move(m).finish();
}

/// Gossip a transaction that entered the local mempool from a local client.
inline Step announce_transaction(ChainState chain, PeerState peers, const Transaction &tx, std::int64_t now) {
  detail::Machine m(std::move(chain), std::move(peers), now);
  m.announce_tx(tx);
  return std::move(m).finish();
}

/// Gossip a block the local node just mined and appended.
inline Step announce_block(ChainState chain, PeerState peers, const Block &b, std::int64_t now) {
  detail::Machine m(std::move(chain), std::move(peers), now);
  m.announce_block(b);
  return std::move(m).finish();
}

}  // namespace chunkchain::p2p
