#pragma once

#include <json.hpp>

#include "chunkchain/ledger/block.hpp"

namespace chunkchain {

using json = nlohmann::json;

inline json to_json(const Transaction &tx) {
  return {{"id", tx.id.hex()},
          {"kind", to_string(tx.kind)},
          {"author", to_hex(tx.author)},
          {"author_nick", tx.author_nick},
          {"payload", to_hex(tx.payload)},
          {"timestamp", tx.timestamp},
          {"signature", to_hex(tx.signature)}};
}

inline json header_to_json(const BlockHeader &h) {
  return {{"index", h.index},           {"prev_hash", h.prev_hash.hex()},
          {"tx_root", h.tx_root.hex()}, {"timestamp", h.timestamp},
          {"difficulty", h.difficulty}, {"nonce", h.nonce},
          {"miner_nick", h.miner_nick}};
}

inline json to_json(const Block &b) {
  json j = header_to_json(b.header);
  j["transactions"] = json::array();
  for (const auto &tx : b.transactions) j["transactions"].push_back(to_json(tx));
  return j;
}

namespace detail {

template <typename T>
T required(const json &j, const char *key) {
  if (!j.is_object() || !j.contains(key)) throw DecodeError(std::string("missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw DecodeError(std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace detail

inline Transaction transaction_from_json(const json &j) {
  using detail::required;
  Transaction tx;
  tx.id = Digest::from_hex(required<std::string>(j, "id"));
  tx.kind = tx_kind_from_string(required<std::string>(j, "kind"));
  tx.author = from_hex(required<std::string>(j, "author"));
  tx.author_nick = required<std::string>(j, "author_nick");
  tx.payload = from_hex(required<std::string>(j, "payload"));
  tx.timestamp = required<std::int64_t>(j, "timestamp");
  tx.signature = from_hex(required<std::string>(j, "signature"));
  return tx;
}

inline Block block_from_json(const json &j) {
  using detail::required;
  Block b;
  b.header.index = required<std::uint64_t>(j, "index");
  b.header.prev_hash = Digest::from_hex(required<std::string>(j, "prev_hash"));
  b.header.tx_root = Digest::from_hex(required<std::string>(j, "tx_root"));
  b.header.timestamp = required<std::int64_t>(j, "timestamp");
  b.header.difficulty = required<std::uint64_t>(j, "difficulty");
  b.header.nonce = required<std::uint64_t>(j, "nonce");
  b.header.miner_nick = required<std::string>(j, "miner_nick");
  auto txs = required<json>(j, "transactions");
  if (!txs.is_array()) throw DecodeError("\"transactions\" must be an array");
  if (txs.size() > kMaxBlockTransactions) throw DecodeError("block lists more than 64 transactions");
  for (const auto &t : txs) b.transactions.push_back(transaction_from_json(t));
  return b;
}

}  // namespace chunkchain
