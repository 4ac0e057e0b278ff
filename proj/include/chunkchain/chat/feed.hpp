#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chunkchain/ledger/chain.hpp"
#include "chunkchain/ledger/json.hpp"
#include "chunkchain/p2p/protocol.hpp"
#include "chunkchain/chat/session.hpp"

namespace chunkchain::chat {

inline constexpr std::string_view kUnreadable = "[unreadable]";

struct ChatMessageView {
  Digest tx_id;
  std::string nickname;
  std::string plaintext;
  std::int64_t timestamp = 0;
  std::optional<std::uint64_t> block_index;  // nullopt while pending

  bool confirmed() const { return block_index.has_value(); }
  friend bool operator==(const ChatMessageView &, const ChatMessageView &) = default;
};

inline std::string plaintext_of(const Transaction &tx, const crypto::ClassroomKey &key) {
  auto text = crypto::open(key, tx.payload);
  if (!text || !utf8_length(*text)) return std::string(kUnreadable);
  return *text;
}

/// Confirmed chat messages in chain order followed by pending ones ordered by
/// (timestamp, id). Transactions that fail verification are left out.
inline std::vector<ChatMessageView> message_feed(const ChainState &chain, const crypto::ClassroomKey &key) {
  std::vector<ChatMessageView> out;
  auto view = [&](const Transaction &tx, std::optional<std::uint64_t> index) {
    if (tx.kind != TxKind::chat || !verify_transaction(tx)) return;
    out.push_back({tx.id, tx.author_nick, plaintext_of(tx, key), tx.timestamp, index});
  };
  for (const auto &b : chain.blocks)
    for (const auto &tx : b.transactions) view(tx, b.header.index);
  const auto confirmed_count = out.size();
  for (const auto &[id, tx] : chain.mempool)
    if (!chain.confirmed.contains(id)) view(tx, std::nullopt);
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(confirmed_count), out.end(),
            [](const ChatMessageView &a, const ChatMessageView &b) {
              return std::tie(a.timestamp, a.tx_id) < std::tie(b.timestamp, b.tx_id);
            });
  return out;
}

inline nlohmann::json to_json(const ChatMessageView &m) {
  nlohmann::json j = {{"tx_id", m.tx_id.hex()},
                      {"nickname", m.nickname},
                      {"plaintext", m.plaintext},
                      {"timestamp", m.timestamp},
                      {"status", m.confirmed() ? "confirmed" : "pending"}};
  j["block_index"] = m.block_index ? nlohmann::json(*m.block_index) : nlohmann::json(nullptr);
  return j;
}

// Explorer read model.

inline nlohmann::json get_block(const ChainState &chain, std::uint64_t index) {
  if (index > chain.tip_index())
    throw ChatError(ChatError::Code::not_found, "no block with index " + std::to_string(index));
  const auto &b = chain.blocks[index];
  auto j = to_json(b);
  j["hash"] = block_hash(b).hex();
  return j;
}

inline nlohmann::json get_transaction(const ChainState &chain, const Digest &id, const crypto::ClassroomKey &key) {
  const Transaction *tx = nullptr;
  std::optional<std::uint64_t> index;
  if (auto it = chain.confirmed.find(id); it != chain.confirmed.end()) {
    index = it->second;
    for (const auto &t : chain.blocks[it->second].transactions)
      if (t.id == id) tx = &t;
  } else if (auto m = chain.mempool.find(id); m != chain.mempool.end()) {
    tx = &m->second;
  }
  if (!tx) throw ChatError(ChatError::Code::not_found, "no transaction " + id.hex());
  auto j = to_json(*tx);
  j["ciphertext"] = j["payload"];
  if (tx->kind == TxKind::chat) j["plaintext"] = plaintext_of(*tx, key);
  else j["plaintext"] = std::string(tx->payload.begin(), tx->payload.end());
  j["verified"] = verify_transaction(*tx);
  j["status"] = index ? "confirmed" : "pending";
  j["block_index"] = index ? nlohmann::json(*index) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json chain_summary(const ChainState &chain) {
  auto blocks = nlohmann::json::array();
  for (const auto &b : chain.blocks) {
    blocks.push_back({{"index", b.header.index},
                      {"hash", block_hash(b).hex()},
                      {"prev_hash", b.header.prev_hash.hex()},
                      {"nonce", b.header.nonce},
                      {"difficulty", b.header.difficulty},
                      {"timestamp", b.header.timestamp},
                      {"miner_nick", b.header.miner_nick},
                      {"tx_count", b.transactions.size()}});
  }
  return {{"blocks", blocks},
          {"tip_index", chain.tip_index()},
          {"tip_hash", chain.tip_hash().hex()},
          {"difficulty", chain.difficulty},
          {"pending", chain.mempool.size()}};
}

inline nlohmann::json peer_table(const p2p::PeerState &peers, std::int64_t now) {
  auto rows = nlohmann::json::array();
  for (const auto &[id, info] : peers.peers) {
    rows.push_back({{"peer_id", id},
                    {"tip_index", info.tip_index},
                    {"last_seen_ms_ago", now - info.last_seen},
                    {"strikes", info.strikes}});
  }
  return {{"self_id", peers.self_id}, {"classroom", peers.classroom_name}, {"peers", rows}};
}

}  // namespace chunkchain::chat
