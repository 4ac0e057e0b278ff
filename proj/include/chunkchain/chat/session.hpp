#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "chunkchain/ledger/chain.hpp"
#include "chunkchain/missions/missions.hpp"

namespace chunkchain::chat {

constexpr std::size_t kMaxNicknameChars = 24;
constexpr std::size_t kMaxMessageChars = 512;
constexpr std::int64_t kPostIntervalMs = 500;

class ChatError : public Error {
 public:
  enum class Code { invalid_nickname, invalid_message, rate_limited, not_found };

  ChatError(Code code, const std::string &what, std::optional<std::int64_t> retry_after_ms = std::nullopt)
      : Error(what), code_(code), retry_after_ms_(retry_after_ms) {}

  Code code() const { return code_; }
  std::optional<std::int64_t> retry_after_ms() const { return retry_after_ms_; }

 private:
  Code code_;
  std::optional<std::int64_t> retry_after_ms_;
};

/// Number of code points, or nullopt if `s` is not well-formed UTF-8.
inline std::optional<std::size_t> utf8_length(std::string_view s) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.size(); ++count) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra;
    std::uint32_t cp;
    if (c < 0x80) {
      extra = 0;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return std::nullopt;
    }
    if (i + extra >= s.size()) return std::nullopt;
    for (std::size_t k = 1; k <= extra; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return std::nullopt;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
    i += extra + 1;
  }
  return count;
}

/// Prefix of `s` holding at most `n` code points. `s` must be valid UTF-8.
inline std::string utf8_prefix(std::string_view s, std::size_t n) {
  std::size_t i = 0;
  for (std::size_t taken = 0; i < s.size() && taken < n; ++taken) {
    ++i;
    while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
  }
  return std::string(s.substr(0, i));
}

inline std::string_view trim(std::string_view s) {
  const auto *ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

struct Session {
  std::string token;
  std::string nickname;
  crypto::SigningKeyPair keypair;
  missions::Progress progress;
  std::optional<std::int64_t> last_post;

  int level() const { return progress.level; }
};

/// Nicknames of every author seen on the chain or in the mempool.
inline std::set<std::string> nicknames_in(const ChainState &chain) {
  std::set<std::string> out;
  for (const auto &b : chain.blocks)
    for (const auto &tx : b.transactions) out.insert(tx.author_nick);
  for (const auto &[id, tx] : chain.mempool) out.insert(tx.author_nick);
  return out;
}

/// In-memory sessions of one node, keyed by opaque token.
class SessionRegistry {
 public:
  /// Creates a session. Collisions with local sessions or with `also_taken`
  /// are resolved by appending "-2", "-3", ...; the base is shortened so the
  /// result still fits the nickname limit.
  Session &join(std::string_view requested, const std::set<std::string> &also_taken = {}) {
    auto nick = trim(requested);
    auto len = utf8_length(nick);
    if (!len) throw ChatError(ChatError::Code::invalid_nickname, "nickname is not valid UTF-8");
    if (*len == 0) throw ChatError(ChatError::Code::invalid_nickname, "nickname must not be empty");
    if (*len > kMaxNicknameChars)
      throw ChatError(ChatError::Code::invalid_nickname, "nickname longer than 24 characters");

    auto taken = [&](const std::string &n) { return by_nick_.contains(n) || also_taken.contains(n); };
    std::string chosen(nick);
    for (int suffix = 2; taken(chosen); ++suffix) {
      auto tail = "-" + std::to_string(suffix);
      chosen = utf8_prefix(nick, kMaxNicknameChars - tail.size()) + tail;
    }

    Session s{crypto::random_token(), chosen, crypto::SigningKeyPair::generate(), {}, std::nullopt};
    auto token = s.token;
    by_nick_.insert(chosen);
    return sessions_.emplace(token, std::move(s)).first->second;
  }

  Session *find(std::string_view token) {
    auto it = sessions_.find(std::string(token));
    return it == sessions_.end() ? nullptr : &it->second;
  }
  const Session *find(std::string_view token) const {
    auto it = sessions_.find(std::string(token));
    return it == sessions_.end() ? nullptr : &it->second;
  }

  /// Drops a session. Its nickname stays reserved: it may already be on chain.
  void leave(std::string_view token) { sessions_.erase(std::string(token)); }

  const std::map<std::string, Session> &sessions() const { return sessions_; }
  std::size_t size() const { return sessions_.size(); }

 private:
  std::map<std::string, Session> sessions_;
  std::set<std::string> by_nick_;
};

/// Validates, encrypts and signs a chat message. Updates the session's rate
/// limiter; adding to the mempool and gossip is left to the caller.
inline Transaction post_message(Session &session, const crypto::ClassroomKey &key, std::string_view text,
                                std::int64_t now) {
  auto len = utf8_length(text);
  if (!len) throw ChatError(ChatError::Code::invalid_message, "message is not valid UTF-8");
  if (*len == 0) throw ChatError(ChatError::Code::invalid_message, "message must not be empty");
  if (*len > kMaxMessageChars)
    throw ChatError(ChatError::Code::invalid_message, "message longer than 512 characters");
  if (session.last_post && now - *session.last_post < kPostIntervalMs) {
    auto wait = kPostIntervalMs - (now - *session.last_post);
    throw ChatError(ChatError::Code::rate_limited, "posting too fast", wait);
  }
  TransactionDraft d{TxKind::chat, session.keypair.public_key, session.nickname, crypto::seal(key, text), now};
  auto tx = sign_transaction(std::move(d), session.keypair);
  session.last_post = now;
  return tx;
}

}  // namespace chunkchain::chat
