#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chunkchain/chat/feed.hpp"
#include "chunkchain/chat/session.hpp"
#include "chunkchain/ledger/chain.hpp"
#include "chunkchain/missions/achievement.hpp"
#include "chunkchain/missions/missions.hpp"
#include "chunkchain/p2p/protocol.hpp"

namespace chunkchain::node {

using json = nlohmann::json;

/// Difficulty of the hand-mining exercise, independent of the chain's.
constexpr unsigned kManualDifficulty = 8;
/// Nonces tried per tick by the auto-miner before yielding.
constexpr std::uint64_t kMineBatch = 1u << 16;
/// Level that unlocks the explorer requests.
constexpr int kExplorerLevel = 2;

struct CoreOptions {
  std::string self_id;
  std::string classroom_name;
  crypto::ClassroomKey key;
  unsigned difficulty = 12;
  std::int64_t auto_mine_interval_ms = 10'000;
  missions::MissionPack pack;
  std::string miner_nick = "teacher";
  bool discovery = false;
  std::string listen_address;  // beacon address; defaults to self_id
};

struct ClientFrame {
  std::string connection;
  json frame;
};

/// What the runtime must do after one step of the core.
struct Effects {
  std::vector<ClientFrame> to_clients;
  std::vector<p2p::Outbound> to_peers;
  std::optional<p2p::Beacon> beacon;
  std::vector<Block> mined;

  void append(Effects other) {
    for (auto &f : other.to_clients) to_clients.push_back(std::move(f));
    for (auto &o : other.to_peers) to_peers.push_back(std::move(o));
    if (other.beacon) beacon = std::move(other.beacon);
    for (auto &b : other.mined) mined.push_back(std::move(b));
  }
};

class ApiError : public Error {
 public:
  ApiError(std::string code, const std::string &what, json extra = json::object())
      : Error(what), code_(std::move(code)), extra_(std::move(extra)) {}
  const std::string &code() const { return code_; }
  const json &extra() const { return extra_; }

 private:
  std::string code_;
  json extra_;
};

/// Single-writer node state machine: client requests, peer messages and
/// timer ticks go in, frames to send come out. Not thread-safe; the runtime
/// serializes all calls.
class NodeCore {
 public:
  NodeCore(CoreOptions options, std::int64_t now)
      : opt_(std::move(options)),
        chain_(make_chain(opt_.classroom_name, opt_.difficulty)),
        peers_(p2p::make_peer_state(opt_.self_id, opt_.classroom_name)),
        last_mined_(now) {
    if (opt_.listen_address.empty()) opt_.listen_address = opt_.self_id;
  }

  const ChainState &chain() const { return chain_; }
  const p2p::PeerState &peers() const { return peers_; }
  const chat::SessionRegistry &sessions() const { return sessions_; }
  const CoreOptions &options() const { return opt_; }
  std::size_t connection_count() const { return connections_.size(); }

  void open_connection(const std::string &connection) { connections_.try_emplace(connection); }
  void close_connection(const std::string &connection) { connections_.erase(connection); }

  Effects handle_client(const std::string &connection, std::string_view text, std::int64_t now) {
    auto frame = json::parse(text, nullptr, false);
    if (frame.is_discarded()) {
      Effects fx;
      fx.to_clients.push_back({connection, error_frame(json(nullptr), "malformed", "frame is not valid JSON")});
      return fx;
    }
    return handle_client(connection, frame, now);
  }

  Effects handle_client(const std::string &connection, const json &frame, std::int64_t now) {
    open_connection(connection);
    auto before = snapshot();
    Effects fx, events;
    const json req_id = frame.is_object() && frame.contains("req_id") ? frame["req_id"] : json(nullptr);
    try {
      if (!frame.is_object() || !frame.contains("type") || !frame["type"].is_string())
        throw ApiError("malformed", "frame needs a string \"type\"");
      const json body = frame.value("body", json::object());
      if (!body.is_object()) throw ApiError("malformed", "\"body\" must be an object");
      const auto type = frame["type"].get<std::string>();
      auto result = dispatch(connection, type, body, now, events);
      fx.to_clients.push_back({connection, {{"req_id", req_id}, {"type", type}, {"body", std::move(result)}}});
    } catch (const ApiError &e) {
      fx.to_clients.push_back({connection, error_frame(req_id, e.code(), e.what(), e.extra())});
    } catch (const chat::ChatError &e) {
      json extra = json::object();
      if (e.retry_after_ms()) extra["retry_after_ms"] = *e.retry_after_ms();
      fx.to_clients.push_back({connection, error_frame(req_id, chat_code(e.code()), e.what(), extra)});
    } catch (const missions::MissionError &e) {
      fx.to_clients.push_back({connection, error_frame(req_id, mission_code(e.code()), e.what())});
    } catch (const json::exception &e) {
      fx.to_clients.push_back({connection, error_frame(req_id, "malformed", e.what())});
    } catch (const DecodeError &e) {
      fx.to_clients.push_back({connection, error_frame(req_id, "malformed", e.what())});
    } catch (const Error &e) {
      fx.to_clients.push_back({connection, error_frame(req_id, "rejected", e.what())});
    }
    fx.append(std::move(events));
    emit_diff(before, now, fx);
    return fx;
  }

  Effects handle_peer_frame(std::string_view text, std::int64_t now, const std::string &connection_peer = {}) {
    return apply_step([&] { return p2p::handle_frame(chain_, peers_, text, now, connection_peer); }, now);
  }

  Effects handle_peer(const p2p::PeerMessage &m, std::int64_t now) {
    return apply_step([&] { return p2p::handle_message(chain_, peers_, m, now); }, now);
  }

  Effects handle_beacon(const p2p::Beacon &b, std::int64_t now) {
    return apply_step([&] { return p2p::handle_beacon(chain_, peers_, b, now); }, now);
  }

  Effects connect(const std::string &address, std::int64_t now) {
    return apply_step([&] { return p2p::connect_to(chain_, peers_, address, now); }, now);
  }

  /// Periodic work: peer liveness, discovery beacons and the auto-miner.
  Effects tick(std::int64_t now) {
    auto fx = apply_step([&] { return p2p::tick(chain_, peers_, now); }, now);
    fx.beacon = p2p::discovery_tick(peers_, {opt_.discovery, opt_.listen_address}, now);
    if (opt_.auto_mine_interval_ms > 0 && !chain_.mempool.empty() && now - last_mined_ >= opt_.auto_mine_interval_ms)
      fx.append(mine_step(now, kMineBatch));
    return fx;
  }

  /// Mines one block from the mempool right away, however long it takes.
  Effects mine_now(std::int64_t now) {
    Effects fx;
    if (chain_.mempool.empty()) return fx;
    bool finished = false;
    while (!finished) fx.append(mine_step(now, kMineBatch, &finished));
    return fx;
  }

  json status(std::int64_t now) const {
    return {{"classroom", opt_.classroom_name},
            {"self_id", opt_.self_id},
            {"tip_index", chain_.tip_index()},
            {"tip_hash", chain_.tip_hash().hex()},
            {"genesis_hash", chain_.genesis_hash().hex()},
            {"difficulty", chain_.difficulty},
            {"peers", peers_.peers.size()},
            {"sessions", sessions_.size()},
            {"connections", connections_.size()},
            {"mempool", chain_.mempool.size()},
            {"mining", job_.has_value()},
            {"now", now}};
  }

 private:
  struct MiningJob {
    Block block;
    std::uint64_t next_nonce = 0;
  };

  struct Snapshot {
    std::map<Digest, std::optional<std::uint64_t>> chat;  // id -> confirming block
    Digest tip;
    std::vector<missions::LeaderboardEntry> board;
    std::set<std::string> peer_ids;
  };

  static json error_frame(const json &req_id, const std::string &code, const std::string &message,
                          json extra = json::object()) {
    json body = {{"code", code}, {"message", message}};
    for (auto &[k, v] : extra.items()) body[k] = v;
    return {{"req_id", req_id}, {"type", "error"}, {"body", body}};
  }

  static std::string chat_code(chat::ChatError::Code c) {
    switch (c) {
      case chat::ChatError::Code::invalid_nickname: return "invalid_nickname";
      case chat::ChatError::Code::invalid_message: return "invalid_message";
      case chat::ChatError::Code::rate_limited: return "rate_limited";
      case chat::ChatError::Code::not_found: return "not_found";
    }
    return "rejected";
  }

  static std::string mission_code(missions::MissionError::Code c) {
    switch (c) {
      case missions::MissionError::Code::unknown_mission: return "unknown_mission";
      case missions::MissionError::Code::locked: return "locked";
      case missions::MissionError::Code::wrong_kind: return "wrong_kind";
      case missions::MissionError::Code::bad_answer: return "bad_answer";
    }
    return "rejected";
  }

  Snapshot snapshot() const {
    Snapshot s;
    for (const auto &b : chain_.blocks)
      for (const auto &tx : b.transactions)
        if (tx.kind == TxKind::chat) s.chat[tx.id] = b.header.index;
    for (const auto &[id, tx] : chain_.mempool)
      if (tx.kind == TxKind::chat && !s.chat.contains(id)) s.chat[id] = std::nullopt;
    s.tip = chain_.tip_hash();
    s.board = missions::leaderboard(chain_);
    for (const auto &[id, info] : peers_.peers) s.peer_ids.insert(id);
    return s;
  }

  void broadcast_event(Effects &fx, const std::string &type, const json &body) const {
    for (const auto &[conn, token] : connections_) fx.to_clients.push_back({conn, {{"type", type}, {"body", body}}});
  }

  void session_event(Effects &fx, const std::string &token, const std::string &type, const json &body) const {
    for (const auto &[conn, bound] : connections_)
      if (bound == token) fx.to_clients.push_back({conn, {{"type", type}, {"body", body}}});
  }

  /// Events derived from comparing state before and after a step.
  void emit_diff(const Snapshot &before, std::int64_t now, Effects &fx) const {
    auto after = snapshot();
    auto find_tx = [&](const Digest &id) -> const Transaction * {
      if (auto it = chain_.mempool.find(id); it != chain_.mempool.end()) return &it->second;
      if (auto it = chain_.confirmed.find(id); it != chain_.confirmed.end())
        for (const auto &t : chain_.blocks[it->second].transactions)
          if (t.id == id) return &t;
      return nullptr;
    };

    std::vector<chat::ChatMessageView> fresh;
    json status_changes = json::array();
    for (const auto &[id, where] : after.chat) {
      auto old = before.chat.find(id);
      if (old == before.chat.end()) {
        const auto *tx = find_tx(id);
        if (tx && verify_transaction(*tx))
          fresh.push_back({id, tx->author_nick, chat::plaintext_of(*tx, opt_.key), tx->timestamp, where});
      } else if (old->second != where) {
        status_changes.push_back({{"tx_id", id.hex()},
                                  {"status", where ? "confirmed" : "pending"},
                                  {"block_index", where ? json(*where) : json(nullptr)}});
      }
    }
    std::sort(fresh.begin(), fresh.end(), [](const auto &a, const auto &b) {
      if (a.block_index.has_value() != b.block_index.has_value()) return a.block_index.has_value();
      return std::tie(a.block_index, a.timestamp, a.tx_id) < std::tie(b.block_index, b.timestamp, b.tx_id);
    });
    for (const auto &m : fresh) broadcast_event(fx, "new_message", chat::to_json(m));

    if (after.tip != before.tip) {
      const auto &tip = chain_.tip();
      broadcast_event(fx, "block_mined",
                      {{"index", tip.header.index},
                       {"hash", after.tip.hex()},
                       {"miner_nick", tip.header.miner_nick},
                       {"tx_count", tip.transactions.size()},
                       {"status_changes", status_changes}});
    }
    if (after.board != before.board) broadcast_event(fx, "leaderboard_changed", missions::to_json(after.board));
    if (after.peer_ids != before.peer_ids) {
      auto table = chat::peer_table(peers_, now);
      for (const auto &[conn, token] : connections_) {
        const auto *s = token ? sessions_.find(*token) : nullptr;
        if (s && s->level() >= kExplorerLevel)
          fx.to_clients.push_back({conn, {{"type", "peers_changed"}, {"body", table}}});
      }
    }
  }

  template <typename F>
  Effects apply_step(F &&step, std::int64_t now) {
    auto before = snapshot();
    auto result = step();
    chain_ = std::move(result.chain);
    peers_ = std::move(result.peers);
    Effects fx;
    fx.to_peers = std::move(result.outbound);
    emit_diff(before, now, fx);
    return fx;
  }

  /// Advances the mining job by up to `budget` nonces. `finished` is set once
  /// the job ends, whether or not a block was produced.
  Effects mine_step(std::int64_t now, std::uint64_t budget, bool *finished = nullptr) {
    Effects fx;
    if (finished) *finished = true;
    if (job_ && job_->block.header.prev_hash != chain_.tip_hash()) job_.reset();
    if (!job_) {
      auto drained = drain_for_block(chain_);
      if (drained.transactions.empty()) return fx;
      job_ = MiningJob{next_block_template(chain_, std::move(drained.transactions), now, opt_.miner_nick), 0};
    }
    auto found = mine(job_->block.header, chain_.difficulty, job_->next_nonce, budget);
    if (!found.nonce) {
      job_->next_nonce += budget;
      if (finished) *finished = false;
      return fx;
    }
    auto block = std::move(job_->block);
    job_.reset();
    block.header.nonce = *found.nonce;
    auto before = snapshot();
    auto outcome = select_chain(chain_, std::span<const Block>(&block, 1));
    if (!outcome.adopted) return fx;
    chain_ = std::move(outcome.state);
    last_mined_ = now;
    auto step = p2p::announce_block(chain_, peers_, block, now);
    peers_ = std::move(step.peers);
    fx.to_peers = std::move(step.outbound);
    fx.mined.push_back(block);
    emit_diff(before, now, fx);
    return fx;
  }

  chat::Session &session_for(const std::string &connection, const json &body) {
    std::string token;
    if (body.contains("token")) {
      token = body.at("token").get<std::string>();
    } else if (auto it = connections_.find(connection); it != connections_.end() && it->second) {
      token = *it->second;
    }
    auto *s = sessions_.find(token);
    if (!s) throw ApiError("invalid_token", "unknown or missing session token");
    connections_[connection] = s->token;
    return *s;
  }

  void require_level(const chat::Session &s, const std::string &what) const {
    if (s.level() < kExplorerLevel)
      throw ApiError("locked", what + " unlocks at level " + std::to_string(kExplorerLevel));
  }

  /// Applies new progress, emitting completion/level events and announcing
  /// a level-up achievement.
  void update_progress(chat::Session &s, missions::Progress next, const std::vector<std::string> &completed,
                       std::int64_t now, Effects &fx) {
    const int old_level = s.level();
    s.progress = std::move(next);
    for (const auto &id : completed)
      session_event(fx, s.token, "mission_completed", {{"mission_id", id}, {"progress", missions::to_json(s.progress)}});
    if (s.level() > old_level) {
      session_event(fx, s.token, "level_up", {{"level", s.level()}});
      auto tx = missions::make_achievement(s.keypair, s.nickname, s.level(), now);
      publish(tx, now, fx);
    }
  }

  void record(chat::Session &s, missions::ActionEvent e, std::int64_t now, Effects &fx) {
    auto r = missions::record_event(opt_.pack, s.progress, e);
    if (!r.newly_completed.empty() || r.progress != s.progress)
      update_progress(s, std::move(r.progress), r.newly_completed, now, fx);
  }

  void publish(const Transaction &tx, std::int64_t now, Effects &fx) {
    chain_ = mempool_add(std::move(chain_), tx);
    auto step = p2p::announce_transaction(chain_, peers_, tx, now);
    peers_ = std::move(step.peers);
    for (auto &o : step.outbound) fx.to_peers.push_back(std::move(o));
  }

  json session_json(const chat::Session &s) const {
    return {{"token", s.token},
            {"nickname", s.nickname},
            {"level", s.level()},
            {"progress", missions::to_json(s.progress)},
            {"public_key", to_hex(s.keypair.public_key)}};
  }

  json mining_template(chat::Session &s, std::int64_t now) {
    auto &t = templates_[s.token];
    if (t.header.prev_hash != chain_.tip_hash() || t.header.miner_nick != s.nickname || t.header.index == 0) {
      t = next_block_template(chain_, {}, now, s.nickname);
      t.header.difficulty = kManualDifficulty;
    }
    auto j = header_to_json(t.header);
    j["target_zero_bits"] = kManualDifficulty;
    return j;
  }

  json dispatch(const std::string &connection, const std::string &type, const json &body, std::int64_t now,
                Effects &fx) {
    using missions::ActionEvent;
    if (type == "join") {
      if (body.contains("token")) {
        auto &s = session_for(connection, body);
        return session_json(s);
      }
      auto &s = sessions_.join(body.value("nickname", std::string{}), chat::nicknames_in(chain_));
      connections_[connection] = s.token;
      auto out = session_json(s);
      out["missions"] = missions::public_view(opt_.pack);
      return out;
    }

    auto &s = session_for(connection, body);
    if (type == "post") {
      auto tx = chat::post_message(s, opt_.key, body.at("text").get<std::string>(), now);
      publish(tx, now, fx);
      record(s, ActionEvent::posted_message, now, fx);
      return {{"tx_id", tx.id.hex()}, {"status", "pending"}};
    }
    if (type == "quiz_answer") {
      auto r = missions::answer_quiz(opt_.pack, s.progress, body.at("mission_id").get<std::string>(),
                                     body.at("answer_index").get<std::size_t>());
      const auto id = body.at("mission_id").get<std::string>();
      std::vector<std::string> done;
      if (r.outcome == missions::QuizOutcome::correct) done.push_back(id);
      update_progress(s, std::move(r.progress), done, now, fx);
      return {{"mission_id", id}, {"outcome", missions::to_string(r.outcome)}, {"progress", missions::to_json(s.progress)}};
    }
    if (type == "action_event") {
      auto e = missions::action_event_from_string(body.at("event").get<std::string>());
      if (!e) throw ApiError("malformed", "unknown action event");
      if (*e == ActionEvent::posted_message || *e == ActionEvent::manual_nonce_found)
        throw ApiError("forbidden", "this event is recorded by the node itself");
      record(s, *e, now, fx);
      return {{"progress", missions::to_json(s.progress)}};
    }
    if (type == "get_mining_template") return mining_template(s, now);
    if (type == "try_nonce") {
      auto header_json = mining_template(s, now);
      const auto nonce = body.at("nonce").get<std::uint64_t>();
      auto probe = try_nonce(templates_[s.token].header, nonce);
      if (probe.meets) record(s, ActionEvent::manual_nonce_found, now, fx);
      return {{"nonce", nonce},
              {"hash", probe.digest.hex()},
              {"leading_zero_bits", leading_zero_bits(probe.digest)},
              {"meets", probe.meets},
              {"template", header_json}};
    }
    if (type == "get_feed") {
      auto feed = json::array();
      for (const auto &m : chat::message_feed(chain_, opt_.key)) feed.push_back(chat::to_json(m));
      return {{"messages", feed}};
    }
    if (type == "get_missions")
      return {{"missions", missions::public_view(opt_.pack)}, {"progress", missions::to_json(s.progress)}};
    if (type == "get_leaderboard") return {{"leaderboard", missions::to_json(missions::leaderboard(chain_))}};
    if (type == "get_block") {
      require_level(s, "the block explorer");
      auto out = chat::get_block(chain_, body.at("index").get<std::uint64_t>());
      record(s, ActionEvent::viewed_block, now, fx);
      return out;
    }
    if (type == "get_tx") {
      require_level(s, "the transaction explorer");
      auto out = chat::get_transaction(chain_, Digest::from_hex(body.at("id").get<std::string>()), opt_.key);
      record(s, ActionEvent::viewed_transaction, now, fx);
      return out;
    }
    if (type == "get_chain_summary") {
      require_level(s, "the chain explorer");
      return chat::chain_summary(chain_);
    }
    if (type == "get_peers") {
      require_level(s, "the peer table");
      auto out = chat::peer_table(peers_, now);
      record(s, ActionEvent::viewed_peers, now, fx);
      return out;
    }
    throw ApiError("unknown_type", "unknown request type \"" + type + "\"");
  }

  CoreOptions opt_;
  ChainState chain_;
  p2p::PeerState peers_;
  chat::SessionRegistry sessions_;
  std::map<std::string, std::optional<std::string>> connections_;  // connection -> session token
  std::map<std::string, Block> templates_;                          // session token -> manual mining puzzle
  std::optional<MiningJob> job_;
  std::int64_t last_mined_;
};

}  // namespace chunkchain::node
