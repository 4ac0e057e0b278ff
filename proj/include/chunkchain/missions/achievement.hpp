#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chunkchain/ledger/chain.hpp"

namespace chunkchain::missions {

/// Signed achievement transaction announcing that `nickname` reached `level`.
inline Transaction make_achievement(const crypto::SigningKeyPair &key, const std::string &nickname, int level,
                                    std::int64_t now) {
  const auto body = nlohmann::json{{"nickname", nickname}, {"level", level}}.dump();
  TransactionDraft d{TxKind::achievement, key.public_key, nickname, Bytes(body.begin(), body.end()), now};
  return sign_transaction(std::move(d), key);
}

struct Achievement {
  std::string nickname;
  int level = 0;
};

/// Parses an achievement payload. Rejects payloads whose nickname differs
/// from the signed author nickname.
inline std::optional<Achievement> read_achievement(const Transaction &tx) {
  if (tx.kind != TxKind::achievement) return std::nullopt;
  auto body = nlohmann::json::parse(tx.payload.begin(), tx.payload.end(), nullptr, false);
  if (body.is_discarded() || !body.is_object()) return std::nullopt;
  auto nick = body.find("nickname");
  auto level = body.find("level");
  if (nick == body.end() || !nick->is_string() || level == body.end() || !level->is_number_integer())
    return std::nullopt;
  if (nick->get<std::string>() != tx.author_nick) return std::nullopt;
  return Achievement{tx.author_nick, level->get<int>()};
}

struct LeaderboardEntry {
  std::string nickname;
  int level = 0;

  friend bool operator==(const LeaderboardEntry &, const LeaderboardEntry &) = default;
};

/// Highest announced level per nickname over confirmed and pending
/// achievements, ordered by level descending then nickname.
inline std::vector<LeaderboardEntry> leaderboard(const ChainState &chain) {
  std::map<std::string, int> best;
  auto fold = [&](const Transaction &tx) {
    if (auto a = read_achievement(tx)) {
      auto &slot = best[a->nickname];
      slot = std::max(slot, a->level);
    }
  };
  for (const auto &b : chain.blocks)
    for (const auto &tx : b.transactions) fold(tx);
  for (const auto &[id, tx] : chain.mempool) fold(tx);
  std::vector<LeaderboardEntry> out;
  for (const auto &[nick, level] : best) out.push_back({nick, level});
  std::stable_sort(out.begin(), out.end(),
                   [](const LeaderboardEntry &a, const LeaderboardEntry &b) { return a.level > b.level; });
  return out;
}

inline nlohmann::json to_json(const std::vector<LeaderboardEntry> &board) {
  auto out = nlohmann::json::array();
  for (const auto &e : board) out.push_back({{"nickname", e.nickname}, {"level", e.level}});
  return out;
}

}  // namespace chunkchain::missions
