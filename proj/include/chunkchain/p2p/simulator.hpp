#pragma once

#include <cstdint>
#include <queue>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "chunkchain/p2p/protocol.hpp"

namespace chunkchain::p2p {

struct SimNode {
  ChainState chain;
  PeerState peers;
  crypto::SigningKeyPair key;
  std::string nick;
};

/// `n` fresh nodes of one classroom with ids "node-0".."node-(n-1)" and keys
/// derived from `seed`.
inline std::vector<SimNode> make_sim_nodes(std::size_t n, const std::string &classroom, unsigned difficulty,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SimNode> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    Bytes key_seed(crypto::kSeedBytes);
    for (auto &b : key_seed) b = static_cast<std::uint8_t>(rng());
    auto id = "node-" + std::to_string(i);
    nodes.push_back({make_chain(classroom, difficulty), make_peer_state(id, classroom),
                     crypto::SigningKeyPair::from_seed(key_seed), id});
  }
  return nodes;
}

enum class SimEventKind { inject_tx, mine, tick };

struct ScriptedEvent {
  std::int64_t at = 0;
  std::size_t node = 0;
  SimEventKind kind = SimEventKind::tick;
  std::string text;  // payload for inject_tx
};

struct NetworkModel {
  std::int64_t min_latency_ms = 1;
  std::int64_t max_latency_ms = 50;
  double drop_probability = 0.0;
};

struct Schedule {
  std::vector<ScriptedEvent> events;
  NetworkModel network;
  std::size_t max_steps = 5'000'000;
};

struct TraceEntry {
  std::int64_t sent_at = 0;
  std::int64_t deliver_at = 0;
  std::string from;
  std::string to;
  std::string type;
  bool dropped = false;
};

struct SimulationResult {
  std::vector<SimNode> nodes;
  std::vector<TraceEntry> trace;
  std::vector<Digest> mined_blocks;
  std::int64_t end_time = 0;

  bool converged() const {
    for (const auto &n : nodes)
      if (n.chain.blocks != nodes.front().chain.blocks) return false;
    return true;
  }

  /// Mined blocks that did not end up in node 0's chain.
  std::size_t abandoned_blocks() const {
    std::set<Digest> final_chain;
    for (const auto &b : nodes.front().chain.blocks) final_chain.insert(block_hash(b));
    std::size_t n = 0;
    for (const auto &h : mined_blocks)
      if (!final_chain.contains(h)) ++n;
    return n;
  }

  std::size_t messages_of_type(MessageType t) const {
    std::size_t n = 0;
    for (const auto &e : trace)
      if (e.type == to_string(t)) ++n;
    return n;
  }
};

/// Discrete-event run of the gossip protocol over a simulated full-broadcast
/// LAN. Nodes discover each other through beacons at t = 0, then scripted
/// events fire; the run ends when no event or message remains. Identical
/// inputs and seed give an identical trace.
inline SimulationResult simulate(std::vector<SimNode> nodes, const Schedule &schedule, std::uint64_t seed) {
  if (nodes.empty()) throw Error("simulation needs at least one node");
  for (const auto &e : schedule.events)
    if (e.node >= nodes.size()) throw Error("schedule references unknown node " + std::to_string(e.node));
  const auto &net = schedule.network;
  if (net.min_latency_ms < 0 || net.max_latency_ms < net.min_latency_ms) throw Error("invalid latency model");

  std::mt19937_64 rng(seed);
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < nodes.size(); ++i) index_of[nodes[i].peers.self_id] = i;

  struct Delivery {
    std::size_t to;
    PeerMessage message;
  };
  struct BeaconDelivery {
    std::size_t to;
    Beacon beacon;
  };
  struct Item {
    std::int64_t at;
    std::uint64_t seq;
    std::variant<std::size_t, Delivery, BeaconDelivery> what;  // size_t: scripted event index
  };
  auto later = [](const Item &a, const Item &b) { return a.at != b.at ? a.at > b.at : a.seq > b.seq; };
  std::priority_queue<Item, std::vector<Item>, decltype(later)> queue(later);
  std::uint64_t seq = 0;

  SimulationResult result;
  std::uniform_int_distribution<std::int64_t> latency(net.min_latency_ms, net.max_latency_ms);
  std::bernoulli_distribution drop(net.drop_probability);

  auto dispatch = [&](std::int64_t now, std::size_t from, std::vector<Outbound> &out) {
    for (auto &o : out) {
      auto it = index_of.find(o.to);
      TraceEntry entry{now, now, nodes[from].peers.self_id, o.to, std::string(to_string(o.message.type)), false};
      if (it == index_of.end()) {
        entry.dropped = true;
      } else {
        entry.deliver_at = now + latency(rng);
        entry.dropped = net.drop_probability > 0 && drop(rng);
        if (!entry.dropped) queue.push({entry.deliver_at, seq++, Delivery{it->second, std::move(o.message)}});
      }
      result.trace.push_back(std::move(entry));
    }
  };
  auto apply = [&](std::size_t i, Step step, std::int64_t now) {
    nodes[i].chain = std::move(step.chain);
    nodes[i].peers = std::move(step.peers);
    dispatch(now, i, step.outbound);
  };

  if (nodes.size() > 1) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      auto beacon = discovery_tick(nodes[i].peers, {}, 0);
      if (!beacon) continue;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (j == i) continue;
        auto at = latency(rng);
        result.trace.push_back({0, at, nodes[i].peers.self_id, nodes[j].peers.self_id, "BEACON", false});
        queue.push({at, seq++, BeaconDelivery{j, *beacon}});
      }
    }
  }
  for (std::size_t e = 0; e < schedule.events.size(); ++e) queue.push({schedule.events[e].at, seq++, e});

  std::size_t steps = 0;
  while (!queue.empty()) {
    if (++steps > schedule.max_steps) throw Error("simulation exceeded its step budget");
    auto item = queue.top();
    queue.pop();
    const auto now = item.at;
    result.end_time = now;

    if (auto *d = std::get_if<Delivery>(&item.what)) {
      auto &n = nodes[d->to];
      apply(d->to, handle_message(std::move(n.chain), std::move(n.peers), d->message, now), now);
    } else if (auto *b = std::get_if<BeaconDelivery>(&item.what)) {
      auto &n = nodes[b->to];
      apply(b->to, handle_beacon(std::move(n.chain), std::move(n.peers), b->beacon, now), now);
    } else {
      const auto &ev = schedule.events[std::get<std::size_t>(item.what)];
      auto &n = nodes[ev.node];
      switch (ev.kind) {
        case SimEventKind::inject_tx: {
          TransactionDraft draft{TxKind::chat, n.key.public_key, n.nick, Bytes(ev.text.begin(), ev.text.end()), now};
          auto tx = sign_transaction(std::move(draft), n.key);
          auto chain = mempool_add(std::move(n.chain), tx);
          apply(ev.node, announce_transaction(std::move(chain), std::move(n.peers), tx, now), now);
          break;
        }
        case SimEventKind::mine: {
          auto picked = drain_for_block(n.chain).transactions;
          auto block = next_block_template(n.chain, std::move(picked), now, n.nick);
          auto found = mine(block.header, n.chain.difficulty, rng(), std::uint64_t{1} << 40);
          block.header.nonce = *found.nonce;
          auto outcome = select_chain(n.chain, std::span<const Block>(&block, 1));
          if (!outcome.adopted) throw Error("locally mined block was rejected");
          result.mined_blocks.push_back(block_hash(block));
          apply(ev.node, announce_block(std::move(outcome.state), std::move(n.peers), block, now), now);
          break;
        }
        case SimEventKind::tick:
          apply(ev.node, tick(std::move(n.chain), std::move(n.peers), now), now);
          break;
      }
    }
  }
  result.nodes = std::move(nodes);
  return result;
}

}  // namespace chunkchain::p2p
