#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chunkchain/ledger/bytes.hpp"
#include "chunkchain/ledger/crypto.hpp"
#include "chunkchain/ledger/transaction.hpp"

namespace chunkchain {

constexpr std::size_t kMaxBlockTransactions = 64;
constexpr unsigned kMaxDifficulty = 32;

struct BlockHeader {
  std::uint64_t index = 0;
  Digest prev_hash;
  Digest tx_root;
  std::int64_t timestamp = 0;
  std::uint64_t difficulty = 0;
  std::uint64_t nonce = 0;
  std::string miner_nick;

  friend bool operator==(const BlockHeader &, const BlockHeader &) = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> transactions;

  friend bool operator==(const Block &, const Block &) = default;
};

// Byte offset of the nonce inside the canonical header encoding:
// index(8) + prev_hash(4+32) + tx_root(4+32) + timestamp(8) + difficulty(8).
constexpr std::size_t kNonceOffset = 96;

inline Bytes encode_header(const BlockHeader &h) {
  CanonicalWriter w;
  w.u64(h.index);
  w.field(h.prev_hash);
  w.field(h.tx_root);
  w.i64(h.timestamp);
  w.u64(h.difficulty);
  w.u64(h.nonce);
  w.field(h.miner_nick);
  return std::move(w).take();
}

inline Digest hash_header(const BlockHeader &h) { return crypto::sha256(encode_header(h)); }

inline Digest block_hash(const Block &b) { return hash_header(b.header); }

/// SHA-256 over the concatenated transaction ids in block order.
inline Digest compute_tx_root(std::span<const Transaction> txs) {
  Bytes concat;
  concat.reserve(txs.size() * 32);
  for (const auto &tx : txs) concat.insert(concat.end(), tx.id.bytes.begin(), tx.id.bytes.end());
  return crypto::sha256(concat);
}

inline Bytes encode_block(const Block &b) {
  CanonicalWriter w;
  w.u64(b.header.index);
  w.field(b.header.prev_hash);
  w.field(b.header.tx_root);
  w.i64(b.header.timestamp);
  w.u64(b.header.difficulty);
  w.u64(b.header.nonce);
  w.field(b.header.miner_nick);
  w.count(b.transactions.size());
  for (const auto &tx : b.transactions) write_transaction(w, tx);
  return std::move(w).take();
}

inline Block decode_block(ByteView raw) {
  CanonicalReader r(raw);
  Block b;
  b.header.index = r.u64();
  b.header.prev_hash = r.digest();
  b.header.tx_root = r.digest();
  b.header.timestamp = r.i64();
  b.header.difficulty = r.u64();
  b.header.nonce = r.u64();
  b.header.miner_nick = r.text();
  auto n = r.count();
  if (n > kMaxBlockTransactions) throw DecodeError("block lists more than 64 transactions");
  b.transactions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) b.transactions.push_back(read_transaction(r));
  if (!r.done()) throw DecodeError("trailing bytes after block");
  return b;
}

inline Block make_genesis(std::string classroom_name, unsigned difficulty) {
  if (difficulty > kMaxDifficulty) throw Error("difficulty must be in [0, 32]");
  Block g;
  g.header.index = 0;
  g.header.tx_root = compute_tx_root({});
  g.header.timestamp = 0;
  g.header.difficulty = difficulty;
  g.header.nonce = 0;
  g.header.miner_nick = std::move(classroom_name);
  return g;
}

struct NonceProbe {
  Digest digest;
  bool meets = false;
};

/// One manual guess: hashes the template with `nonce` and checks the target.
inline NonceProbe try_nonce(BlockHeader header, std::uint64_t nonce) {
  header.nonce = nonce;
  auto digest = hash_header(header);
  return {digest, leading_zero_bits(digest) >= header.difficulty};
}

struct MineResult {
  std::optional<std::uint64_t> nonce;  // nullopt when the budget was exhausted
  std::uint64_t attempts = 0;
  Digest digest;
};

/// Sequential nonce search starting at `nonce_start`. Deterministic for a
/// given template, so results are reproducible.
inline MineResult mine(BlockHeader header, unsigned difficulty, std::uint64_t nonce_start,
                       std::uint64_t max_attempts) {
  if (max_attempts == 0) throw Error("max_attempts must be at least 1");
  if (difficulty > kMaxDifficulty) throw Error("difficulty must be in [0, 32]");
  header.difficulty = difficulty;
  header.nonce = 0;
  auto encoded = encode_header(header);
  MineResult result;
  std::uint64_t nonce = nonce_start;
  for (std::uint64_t i = 0; i < max_attempts; ++i, ++nonce) {
    for (int b = 0; b < 8; ++b)
      encoded[kNonceOffset + b] = static_cast<std::uint8_t>(nonce >> (56 - 8 * b));
    auto digest = crypto::sha256(encoded);
    result.attempts = i + 1;
    if (leading_zero_bits(digest) >= difficulty) {
      result.nonce = nonce;
      result.digest = digest;
      return result;
    }
  }
  return result;
}

}  // namespace chunkchain
