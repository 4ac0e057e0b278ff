#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chunkchain/ledger/json.hpp"

namespace chunkchain::p2p {

constexpr std::size_t kSyncPageSize = 32;
constexpr std::size_t kMaxFrameBytes = 16u << 20;
constexpr std::uint16_t kDiscoveryPort = 40123;
constexpr std::uint16_t kDefaultPeerPort = 40124;

enum class MessageType { hello, peers, tx_gossip, block_gossip, chain_request, chain_response, ping, pong };

inline std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::hello: return "HELLO";
    case MessageType::peers: return "PEERS";
    case MessageType::tx_gossip: return "TX_GOSSIP";
    case MessageType::block_gossip: return "BLOCK_GOSSIP";
    case MessageType::chain_request: return "CHAIN_REQUEST";
    case MessageType::chain_response: return "CHAIN_RESPONSE";
    case MessageType::ping: return "PING";
    case MessageType::pong: return "PONG";
  }
  return "?";
}

inline MessageType message_type_from_string(std::string_view s) {
  for (auto t : {MessageType::hello, MessageType::peers, MessageType::tx_gossip, MessageType::block_gossip,
                 MessageType::chain_request, MessageType::chain_response, MessageType::ping, MessageType::pong})
    if (to_string(t) == s) return t;
  throw DecodeError("unknown message type: " + std::string(s));
}

struct Hello {
  std::string classroom_name;
  Digest genesis_hash;
  std::uint64_t tip_index = 0;
};

/// Reply to HELLO. Carries the responder's genesis so the initiator can
/// admit it as a peer.
struct PeerList {
  Digest genesis_hash;
  std::uint64_t tip_index = 0;
  std::vector<std::string> addresses;
};

struct ChainRequest {
  std::uint64_t from_index = 0;
  std::uint64_t to_index = 0;
};

struct ChainResponse {
  std::vector<Block> blocks;
};

/// PING/PONG body: the sender's tip, used to detect divergence.
struct TipStatus {
  std::uint64_t tip_index = 0;
  Digest tip_hash;
};

using MessageBody = std::variant<Hello, PeerList, Transaction, Block, ChainRequest, ChainResponse, TipStatus>;

struct PeerMessage {
  MessageType type = MessageType::ping;
  std::string sender_id;
  MessageBody body;
};

inline PeerMessage make_hello(std::string sender, Hello h) { return {MessageType::hello, std::move(sender), std::move(h)}; }

/// Discovery datagram.
struct Beacon {
  std::string classroom_name;
  std::string address;
};

inline json to_json(const PeerMessage &m) {
  json body;
  std::visit(
      [&](const auto &b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Hello>) {
          body = {{"classroom_name", b.classroom_name}, {"genesis_hash", b.genesis_hash.hex()}, {"tip_index", b.tip_index}};
        } else if constexpr (std::is_same_v<T, PeerList>) {
          body = {{"genesis_hash", b.genesis_hash.hex()}, {"tip_index", b.tip_index}, {"addresses", b.addresses}};
        } else if constexpr (std::is_same_v<T, Transaction>) {
          body = chunkchain::to_json(b);
        } else if constexpr (std::is_same_v<T, Block>) {
          body = chunkchain::to_json(b);
        } else if constexpr (std::is_same_v<T, ChainRequest>) {
          body = {{"from_index", b.from_index}, {"to_index", b.to_index}};
        } else if constexpr (std::is_same_v<T, ChainResponse>) {
          body = {{"blocks", json::array()}};
          for (const auto &blk : b.blocks) body["blocks"].push_back(chunkchain::to_json(blk));
        } else {
          body = {{"tip_index", b.tip_index}, {"tip_hash", b.tip_hash.hex()}};
        }
      },
      m.body);
  return {{"type", to_string(m.type)}, {"sender_id", m.sender_id}, {"body", std::move(body)}};
}

/// Structural decode; throws DecodeError on anything malformed, including
/// a body that does not match the type or a non-contiguous CHAIN_RESPONSE.
inline PeerMessage message_from_json(const json &j) {
  using detail::required;
  PeerMessage m;
  m.type = message_type_from_string(required<std::string>(j, "type"));
  m.sender_id = required<std::string>(j, "sender_id");
  if (m.sender_id.empty()) throw DecodeError("empty sender_id");
  auto body = required<json>(j, "body");
  switch (m.type) {
    case MessageType::hello:
      m.body = Hello{required<std::string>(body, "classroom_name"),
                     Digest::from_hex(required<std::string>(body, "genesis_hash")),
                     required<std::uint64_t>(body, "tip_index")};
      break;
    case MessageType::peers:
      m.body = PeerList{Digest::from_hex(required<std::string>(body, "genesis_hash")),
                        required<std::uint64_t>(body, "tip_index"),
                        required<std::vector<std::string>>(body, "addresses")};
      break;
    case MessageType::tx_gossip: m.body = transaction_from_json(body); break;
    case MessageType::block_gossip: m.body = block_from_json(body); break;
    case MessageType::chain_request: {
      ChainRequest r{required<std::uint64_t>(body, "from_index"), required<std::uint64_t>(body, "to_index")};
      if (r.from_index > r.to_index) throw DecodeError("CHAIN_REQUEST range is inverted");
      m.body = r;
      break;
    }
    case MessageType::chain_response: {
      ChainResponse r;
      auto blocks = required<json>(body, "blocks");
      if (!blocks.is_array()) throw DecodeError("\"blocks\" must be an array");
      if (blocks.size() > kSyncPageSize) throw DecodeError("CHAIN_RESPONSE carries more than 32 blocks");
      for (const auto &b : blocks) r.blocks.push_back(block_from_json(b));
      for (std::size_t i = 1; i < r.blocks.size(); ++i)
        if (r.blocks[i].header.index != r.blocks[i - 1].header.index + 1)
          throw DecodeError("CHAIN_RESPONSE blocks are not contiguous");
      m.body = std::move(r);
      break;
    }
    case MessageType::ping:
    case MessageType::pong:
      m.body = TipStatus{required<std::uint64_t>(body, "tip_index"),
                         Digest::from_hex(required<std::string>(body, "tip_hash"))};
      break;
  }
  return m;
}

inline PeerMessage parse_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw DecodeError(std::string("message is not valid JSON: ") + e.what());
  }
  return message_from_json(j);
}

/// 4-byte big-endian length prefix + UTF-8 JSON.
inline std::string encode_frame(const PeerMessage &m) {
  auto text = to_json(m).dump();
  std::string frame(4, '\0');
  auto n = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) frame[i] = static_cast<char>((n >> (24 - 8 * i)) & 0xff);
  frame += text;
  return frame;
}

/// Incremental splitter for a TCP byte stream of frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }

  /// Next complete frame payload, if any. Throws on an oversized frame.
  std::optional<std::string> next() {
    if (buffer_.size() < 4) return std::nullopt;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<std::uint8_t>(buffer_[i]);
    if (n > kMaxFrameBytes) throw DecodeError("frame exceeds size limit");
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    std::string payload = buffer_.substr(4, n);
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    return payload;
  }

 private:
  std::string buffer_;
};

inline std::string encode_beacon(const Beacon &b) {
  return json{{"classroom_name", b.classroom_name}, {"address", b.address}}.dump();
}

inline std::optional<Beacon> parse_beacon(std::string_view text) {
  try {
    auto j = json::parse(text);
    return Beacon{j.at("classroom_name").get<std::string>(), j.at("address").get<std::string>()};
  } catch (const json::exception &) {
    return std::nullopt;
  }
}

}  // namespace chunkchain::p2p
