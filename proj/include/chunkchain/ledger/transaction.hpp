#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "chunkchain/ledger/bytes.hpp"
#include "chunkchain/ledger/crypto.hpp"

namespace chunkchain {

enum class TxKind : std::uint8_t { chat = 0, achievement = 1, system = 2 };

constexpr std::size_t kMaxPayloadBytes = 4096;

inline std::string_view to_string(TxKind kind) {
  switch (kind) {
    case TxKind::chat: return "chat";
    case TxKind::achievement: return "achievement";
    case TxKind::system: return "system";
  }
  return "unknown";
}

inline TxKind tx_kind_from_string(std::string_view s) {
  if (s == "chat") return TxKind::chat;
  if (s == "achievement") return TxKind::achievement;
  if (s == "system") return TxKind::system;
  throw DecodeError("unknown transaction kind: " + std::string(s));
}

inline TxKind tx_kind_from_byte(std::uint8_t b) {
  if (b > 2) throw DecodeError("unknown transaction kind byte");
  return static_cast<TxKind>(b);
}

/// The signed part of a transaction.
struct TransactionDraft {
  TxKind kind = TxKind::chat;
  Bytes author;
  std::string author_nick;
  Bytes payload;
  std::int64_t timestamp = 0;
};

struct Transaction {
  Digest id;
  TxKind kind = TxKind::chat;
  Bytes author;
  std::string author_nick;
  Bytes payload;
  std::int64_t timestamp = 0;
  Bytes signature;

  friend bool operator==(const Transaction &, const Transaction &) = default;
};

namespace detail {

inline Bytes signing_bytes(TxKind kind, ByteView author, std::string_view nick, ByteView payload,
                           std::int64_t timestamp) {
  CanonicalWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  w.field(author);
  w.field(nick);
  w.field(payload);
  w.i64(timestamp);
  return std::move(w).take();
}

}  // namespace detail

inline Bytes signing_bytes(const Transaction &tx) {
  return detail::signing_bytes(tx.kind, tx.author, tx.author_nick, tx.payload, tx.timestamp);
}

inline Digest compute_tx_id(const Transaction &tx) { return crypto::sha256(signing_bytes(tx)); }

inline Transaction sign_transaction(TransactionDraft draft, const crypto::SigningKeyPair &key) {
  if (draft.author != key.public_key) throw Error("draft author does not match the signing key");
  if (draft.payload.size() > kMaxPayloadBytes) throw Error("payload exceeds 4096 bytes");
  Transaction tx;
  tx.kind = draft.kind;
  tx.author = std::move(draft.author);
  tx.author_nick = std::move(draft.author_nick);
  tx.payload = std::move(draft.payload);
  tx.timestamp = draft.timestamp;
  auto message = signing_bytes(tx);
  tx.id = crypto::sha256(message);
  tx.signature = crypto::sign(message, key.secret_key);
  return tx;
}

/// True when the id recomputes, the payload fits, and the signature verifies
/// under the author key.
inline bool verify_transaction(const Transaction &tx) {
  if (tx.payload.size() > kMaxPayloadBytes) return false;
  auto message = signing_bytes(tx);
  if (crypto::sha256(message) != tx.id) return false;
  return crypto::verify(message, tx.signature, tx.author);
}

inline void write_transaction(CanonicalWriter &w, const Transaction &tx) {
  w.field(tx.id);
  w.u8(static_cast<std::uint8_t>(tx.kind));
  w.field(tx.author);
  w.field(tx.author_nick);
  w.field(tx.payload);
  w.i64(tx.timestamp);
  w.field(tx.signature);
}

inline Transaction read_transaction(CanonicalReader &r) {
  Transaction tx;
  tx.id = r.digest();
  tx.kind = tx_kind_from_byte(r.u8());
  tx.author = r.field();
  tx.author_nick = r.text();
  tx.payload = r.field();
  tx.timestamp = r.i64();
  tx.signature = r.field();
  return tx;
}

}  // namespace chunkchain
